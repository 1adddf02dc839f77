//! Scenario configuration: the complete description of a data-generating process.
//!
//! A scenario is a single JSON document. Parsing is strict (unknown keys are
//! rejected) and every validation failure names the offending field path, e.g.
//! `treatment_mechanism.sigma_eta`. Defaults are filled on parse and written
//! back out by [`ScenarioSpec::to_json`], so `parse(to_json(spec)) == spec`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of discarded warm-up periods for stationary-regime estimands.
pub const DEFAULT_BURN_IN: usize = 500;

/// A piecewise-constant override: `value` applies from period `from` (1-based)
/// until the next segment starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSegment {
    pub from: usize,
    pub beta: Vec<f64>,
}

/// Time-varying or constant lag coefficients `beta[t][s]`.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaSchedule {
    Constant(Vec<f64>),
    /// Piecewise constant in `t`; the first segment starts at `t = 1`.
    Segments(Vec<BetaSegment>),
    /// One row per period `t = 1..=T`.
    Table(Vec<Vec<f64>>),
}

impl BetaSchedule {
    fn row(&self, t: usize) -> &[f64] {
        match self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Segments(segs) => {
                let idx = segs.partition_point(|s| s.from <= t).max(1) - 1;
                &segs[idx].beta
            }
            BetaSchedule::Table(rows) => &rows[(t.max(1) - 1).min(rows.len() - 1)],
        }
    }
}

/// Law of the treatment-free component `U_t` of a linear outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UProcess {
    /// `U_t = 0`; useful for deterministic enumeration checks.
    Zero,
    IidNormal { sigma: f64 },
    Ar1 { phi: f64, sigma: f64 },
    RandomWalk { sigma: f64 },
    Arch1 { omega: f64, alpha: f64 },
}

impl UProcess {
    pub fn is_stationary(&self) -> bool {
        match self {
            UProcess::Zero | UProcess::IidNormal { .. } | UProcess::Arch1 { .. } => true,
            UProcess::Ar1 { phi, .. } => phi.abs() < 1.0,
            UProcess::RandomWalk { .. } => false,
        }
    }

    /// Stationary variance of the innovation that enters `U_t`.
    pub fn innovation_variance(&self) -> f64 {
        match *self {
            UProcess::Zero => 0.0,
            UProcess::IidNormal { sigma } | UProcess::Ar1 { sigma, .. } | UProcess::RandomWalk { sigma } => {
                sigma * sigma
            }
            UProcess::Arch1 { omega, alpha } => omega / (1.0 - alpha),
        }
    }

    /// `lim Cov(U_t, e_{t-p})` where `e` is the innovation of `U`.
    pub fn innovation_cross_moment(&self, p: usize) -> f64 {
        match *self {
            UProcess::Zero => 0.0,
            UProcess::IidNormal { .. } | UProcess::Arch1 { .. } => {
                if p == 0 {
                    self.innovation_variance()
                } else {
                    0.0
                }
            }
            UProcess::Ar1 { phi, sigma } => phi.powi(p as i32) * sigma * sigma,
            UProcess::RandomWalk { sigma } => sigma * sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArCoefficients {
    pub mu: f64,
    pub phi: f64,
    pub beta0: f64,
    pub sigma_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralCoefficients {
    pub lag_cutoff: usize,
    pub beta: BetaSchedule,
    pub u_process: UProcess,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoCoefficients {
    pub beta0: f64,
    pub beta1: f64,
    pub u_process: UProcess,
}

/// How potential outcomes respond to a treatment path.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeLaw {
    /// `Y_t = mu + phi Y_{t-1} + beta0 w_t + sigma_eps eps_t`.
    LinearAr(ArCoefficients),
    /// `Y_t = U_t + sum_{s=0}^{min(t-1, L)} beta_{t,s} w_{t-s}`.
    LinearGeneral(GeneralCoefficients),
    /// `Y_t = U_t + beta0 w_t + beta1 w_{t-1}`, small enough for exhaustive enumeration.
    BinaryDemo(DemoCoefficients),
}

impl OutcomeLaw {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeLaw::LinearAr(_) => "linear-ar",
            OutcomeLaw::LinearGeneral(_) => "linear-general",
            OutcomeLaw::BinaryDemo(_) => "binary-demo",
        }
    }

    /// Coefficient `beta_{t,s}` of the linear potential-outcome representation.
    pub fn beta(&self, t: usize, s: usize) -> f64 {
        if s >= t {
            return 0.0;
        }
        match self {
            OutcomeLaw::LinearAr(c) => c.phi.powi(s as i32) * c.beta0,
            OutcomeLaw::LinearGeneral(c) => {
                if s > c.lag_cutoff {
                    0.0
                } else {
                    c.beta.row(t).get(s).copied().unwrap_or(0.0)
                }
            }
            OutcomeLaw::BinaryDemo(c) => match s {
                0 => c.beta0,
                1 => c.beta1,
                _ => 0.0,
            },
        }
    }

    /// Law of the treatment-free component; `linear-ar` maps to an AR(1) with mean `mu/(1-phi)`.
    pub fn u_process(&self) -> UProcess {
        match self {
            OutcomeLaw::LinearAr(c) => UProcess::Ar1 { phi: c.phi, sigma: c.sigma_eps },
            OutcomeLaw::LinearGeneral(c) => c.u_process.clone(),
            OutcomeLaw::BinaryDemo(c) => c.u_process.clone(),
        }
    }

    /// Stationary mean of `U_t`.
    pub fn u_mean(&self) -> f64 {
        match self {
            OutcomeLaw::LinearAr(c) => c.mu / (1.0 - c.phi),
            _ => 0.0,
        }
    }
}

/// Treatment assignment mechanism. Treatments are scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TreatmentMechanism {
    /// `W_t = sigma_eta(t) * eta_t`.
    ShockNormal {
        sigma_eta: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        sigma_eta_segments: Vec<Segment>,
    },
    /// `W_t = gamma + theta W_{t-1} + delta Y_{t-1} + sigma_eta * eta_t`.
    PolicyRule { gamma: f64, theta: f64, delta: f64, sigma_eta: f64 },
    /// `W_t ~ Bernoulli(pi)` independently.
    BernoulliIid { pi: f64 },
    /// `P(W_t = 1) = logistic(a + b Y_{t-1} + c W_{t-1})`.
    BernoulliLogistic { a: f64, b: f64, c: f64 },
}

impl TreatmentMechanism {
    pub fn name(&self) -> &'static str {
        match self {
            TreatmentMechanism::ShockNormal { .. } => "shock-normal",
            TreatmentMechanism::PolicyRule { .. } => "policy-rule",
            TreatmentMechanism::BernoulliIid { .. } => "bernoulli-iid",
            TreatmentMechanism::BernoulliLogistic { .. } => "bernoulli-logistic",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, TreatmentMechanism::BernoulliIid { .. } | TreatmentMechanism::BernoulliLogistic { .. })
    }

    /// Zero conditional mean given the past.
    pub fn is_shock(&self) -> bool {
        match *self {
            TreatmentMechanism::ShockNormal { .. } => true,
            TreatmentMechanism::PolicyRule { gamma, theta, delta, .. } => {
                gamma == 0.0 && theta == 0.0 && delta == 0.0
            }
            _ => false,
        }
    }

    /// Treatment innovation scale in effect at period `t` (continuous mechanisms).
    pub fn sigma_eta_at(&self, t: usize) -> f64 {
        match self {
            TreatmentMechanism::ShockNormal { sigma_eta, sigma_eta_segments } => {
                segment_value(*sigma_eta, sigma_eta_segments, t)
            }
            TreatmentMechanism::PolicyRule { sigma_eta, .. } => *sigma_eta,
            _ => 0.0,
        }
    }
}

/// Measured-treatment instrument `What_t = alpha0 + alpha1(t) W_t + sigma_zeta zeta_t + lambda e_t`,
/// where `e_t` is the outcome-side innovation; `lambda != 0` breaks exclusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentBlock {
    #[serde(default)]
    pub alpha0: f64,
    pub alpha1: f64,
    pub sigma_zeta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha1_segments: Vec<Segment>,
}

impl InstrumentBlock {
    pub fn alpha1_at(&self, t: usize) -> f64 {
        segment_value(self.alpha1, &self.alpha1_segments, t)
    }
}

fn segment_value(base: f64, segments: &[Segment], t: usize) -> f64 {
    let idx = segments.partition_point(|s| s.from <= t);
    if idx == 0 {
        base
    } else {
        segments[idx - 1].value
    }
}

/// Validated, immutable description of a data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub horizon: usize,
    pub burn_in: usize,
    pub outcome_law: OutcomeLaw,
    pub treatment: TreatmentMechanism,
    pub instrument: Option<InstrumentBlock>,
    pub rho: f64,
    pub pots_valid: bool,
}

// ---- wire format -------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    horizon: usize,
    #[serde(default)]
    burn_in: Option<usize>,
    outcome_law: String,
    coefficients: serde_json::Value,
    treatment_mechanism: TreatmentMechanism,
    #[serde(default)]
    instrument_block: Option<InstrumentBlock>,
    #[serde(default)]
    rho: Option<f64>,
    #[serde(default)]
    pots_valid: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAr {
    #[serde(default)]
    mu: f64,
    phi: f64,
    beta0: f64,
    #[serde(default = "one")]
    sigma_eps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeneral {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lag_cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_segments: Option<Vec<BetaSegment>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_table: Option<Vec<Vec<f64>>>,
    u_process: UProcess,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemo {
    beta0: f64,
    beta1: f64,
    u_process: UProcess,
}

fn one() -> f64 {
    1.0
}

fn from_value<T: serde::de::DeserializeOwned>(value: serde_json::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        Error::config(path, e.into_inner().to_string())
    })
}

impl ScenarioSpec {
    /// Parses and validates a scenario document.
    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let raw: RawScenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> Result<Self> {
        let outcome_law = match raw.outcome_law.as_str() {
            "linear-ar" => {
                let c: RawAr = from_value(raw.coefficients, "coefficients")?;
                OutcomeLaw::LinearAr(ArCoefficients {
                    mu: c.mu,
                    phi: c.phi,
                    beta0: c.beta0,
                    sigma_eps: c.sigma_eps,
                })
            }
            "linear-general" => {
                let c: RawGeneral = from_value(raw.coefficients, "coefficients")?;
                let given = [c.beta.is_some(), c.beta_segments.is_some(), c.beta_table.is_some()];
                if given.iter().filter(|g| **g).count() != 1 {
                    return Err(Error::config(
                        "coefficients",
                        "exactly one of `beta`, `beta_segments`, `beta_table` is required",
                    ));
                }
                let beta = if let Some(b) = c.beta {
                    BetaSchedule::Constant(b)
                } else if let Some(s) = c.beta_segments {
                    BetaSchedule::Segments(s)
                } else {
                    BetaSchedule::Table(c.beta_table.unwrap_or_default())
                };
                let widest = match &beta {
                    BetaSchedule::Constant(b) => b.len(),
                    BetaSchedule::Segments(s) => s.iter().map(|x| x.beta.len()).max().unwrap_or(0),
                    BetaSchedule::Table(r) => r.iter().map(Vec::len).max().unwrap_or(0),
                };
                OutcomeLaw::LinearGeneral(GeneralCoefficients {
                    lag_cutoff: c.lag_cutoff.unwrap_or(widest.saturating_sub(1)),
                    beta,
                    u_process: c.u_process,
                })
            }
            "binary-demo" => {
                let c: RawDemo = from_value(raw.coefficients, "coefficients")?;
                OutcomeLaw::BinaryDemo(DemoCoefficients { beta0: c.beta0, beta1: c.beta1, u_process: c.u_process })
            }
            other => {
                return Err(Error::config(
                    "outcome_law",
                    format!("unknown outcome law `{other}` (expected linear-ar, linear-general or binary-demo)"),
                ))
            }
        };
        let spec = ScenarioSpec {
            horizon: raw.horizon,
            burn_in: raw.burn_in.unwrap_or(DEFAULT_BURN_IN),
            outcome_law,
            treatment: raw.treatment_mechanism,
            instrument: raw.instrument_block,
            rho: raw.rho.unwrap_or(0.0),
            pots_valid: raw.pots_valid.unwrap_or(false),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every range and consistency rule, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::config("horizon", "horizon must be at least 2"));
        }
        self.validate_outcome_law()?;
        self.validate_treatment()?;
        if let Some(inst) = &self.instrument {
            positive("instrument_block.sigma_zeta", inst.sigma_zeta)?;
            finite("instrument_block.alpha0", inst.alpha0)?;
            finite("instrument_block.alpha1", inst.alpha1)?;
            finite("instrument_block.lambda", inst.lambda)?;
            check_segments("instrument_block.alpha1_segments", &inst.alpha1_segments, false)?;
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::config("rho", format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if self.pots_valid && self.rho != 0.0 && !self.treatment.is_discrete() {
            return Err(Error::config(
                "pots_valid",
                format!(
                    "pots_valid conflicts with rho = {}: the treatment innovation is correlated with the \
                     contemporaneous outcome innovation, violating non-anticipating treatment assignment",
                    self.rho
                ),
            ));
        }
        Ok(())
    }

    fn validate_outcome_law(&self) -> Result<()> {
        match &self.outcome_law {
            OutcomeLaw::LinearAr(c) => {
                finite("coefficients.mu", c.mu)?;
                finite("coefficients.phi", c.phi)?;
                finite("coefficients.beta0", c.beta0)?;
                positive("coefficients.sigma_eps", c.sigma_eps)?;
            }
            OutcomeLaw::LinearGeneral(c) => {
                let expect = c.lag_cutoff + 1;
                let check_row = |path: String, row: &[f64]| -> Result<()> {
                    if row.len() != expect {
                        return Err(Error::config(
                            path,
                            format!("expected {expect} coefficients (lag_cutoff + 1), got {}", row.len()),
                        ));
                    }
                    for (s, b) in row.iter().enumerate() {
                        finite(&format!("{path}[{s}]"), *b)?;
                    }
                    Ok(())
                };
                match &c.beta {
                    BetaSchedule::Constant(b) => check_row("coefficients.beta".into(), b)?,
                    BetaSchedule::Segments(segs) => {
                        if segs.first().map(|s| s.from) != Some(1) {
                            return Err(Error::config("coefficients.beta_segments", "first segment must start at 1"));
                        }
                        for (i, s) in segs.iter().enumerate() {
                            if i > 0 && s.from <= segs[i - 1].from {
                                return Err(Error::config(
                                    format!("coefficients.beta_segments[{i}].from"),
                                    "segment starts must be strictly ascending",
                                ));
                            }
                            check_row(format!("coefficients.beta_segments[{i}].beta"), &s.beta)?;
                        }
                    }
                    BetaSchedule::Table(rows) => {
                        if rows.len() != self.horizon {
                            return Err(Error::config(
                                "coefficients.beta_table",
                                format!("expected {} rows (one per period), got {}", self.horizon, rows.len()),
                            ));
                        }
                        for (i, r) in rows.iter().enumerate() {
                            check_row(format!("coefficients.beta_table[{i}]"), r)?;
                        }
                    }
                }
                validate_u("coefficients.u_process", &c.u_process)?;
            }
            OutcomeLaw::BinaryDemo(c) => {
                finite("coefficients.beta0", c.beta0)?;
                finite("coefficients.beta1", c.beta1)?;
                validate_u("coefficients.u_process", &c.u_process)?;
            }
        }
        Ok(())
    }

    fn validate_treatment(&self) -> Result<()> {
        match &self.treatment {
            TreatmentMechanism::ShockNormal { sigma_eta, sigma_eta_segments } => {
                positive("treatment_mechanism.sigma_eta", *sigma_eta)?;
                check_segments("treatment_mechanism.sigma_eta_segments", sigma_eta_segments, true)?;
            }
            TreatmentMechanism::PolicyRule { gamma, theta, delta, sigma_eta } => {
                finite("treatment_mechanism.gamma", *gamma)?;
                finite("treatment_mechanism.theta", *theta)?;
                finite("treatment_mechanism.delta", *delta)?;
                positive("treatment_mechanism.sigma_eta", *sigma_eta)?;
            }
            TreatmentMechanism::BernoulliIid { pi } => {
                if !(*pi > 0.0 && *pi < 1.0) {
                    return Err(Error::config("treatment_mechanism.pi", format!("pi must lie in (0, 1), got {pi}")));
                }
            }
            TreatmentMechanism::BernoulliLogistic { a, b, c } => {
                finite("treatment_mechanism.a", *a)?;
                finite("treatment_mechanism.b", *b)?;
                finite("treatment_mechanism.c", *c)?;
            }
        }
        Ok(())
    }

    /// Serializes with every default filled in.
    pub fn to_json_value(&self) -> serde_json::Value {
        let coefficients = match &self.outcome_law {
            OutcomeLaw::LinearAr(c) => serde_json::to_value(RawAr {
                mu: c.mu,
                phi: c.phi,
                beta0: c.beta0,
                sigma_eps: c.sigma_eps,
            }),
            OutcomeLaw::LinearGeneral(c) => {
                let mut raw = RawGeneral {
                    lag_cutoff: Some(c.lag_cutoff),
                    beta: None,
                    beta_segments: None,
                    beta_table: None,
                    u_process: c.u_process.clone(),
                };
                match &c.beta {
                    BetaSchedule::Constant(b) => raw.beta = Some(b.clone()),
                    BetaSchedule::Segments(s) => raw.beta_segments = Some(s.clone()),
                    BetaSchedule::Table(t) => raw.beta_table = Some(t.clone()),
                }
                serde_json::to_value(raw)
            }
            OutcomeLaw::BinaryDemo(c) => serde_json::to_value(RawDemo {
                beta0: c.beta0,
                beta1: c.beta1,
                u_process: c.u_process.clone(),
            }),
        }
        .expect("coefficients serialize");
        let raw = RawScenario {
            horizon: self.horizon,
            burn_in: Some(self.burn_in),
            outcome_law: self.outcome_law.name().to_string(),
            coefficients,
            treatment_mechanism: self.treatment.clone(),
            instrument_block: self.instrument.clone(),
            rho: Some(self.rho),
            pots_valid: Some(self.pots_valid),
        };
        serde_json::to_value(raw).expect("scenario serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("scenario serializes")
    }

    /// Hex SHA-256 of the canonical (compact, defaults-filled) document.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_json_value()).expect("scenario serializes");
        crate::bundle::sha256_hex(canonical.as_bytes())
    }

    /// Same scenario with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        let mut s = self.clone();
        s.horizon = horizon;
        s
    }

    /// True when treatments and outcomes share a linear-Gaussian state-space form
    /// (linear-ar outcome with a shock or policy-rule mechanism).
    pub fn linear_gaussian_params(&self) -> Option<LinearGaussianParams> {
        let OutcomeLaw::LinearAr(c) = &self.outcome_law else { return None };
        let (gamma, theta, delta, sigma_eta) = match &self.treatment {
            TreatmentMechanism::ShockNormal { sigma_eta, sigma_eta_segments } if sigma_eta_segments.is_empty() => {
                (0.0, 0.0, 0.0, *sigma_eta)
            }
            TreatmentMechanism::PolicyRule { gamma, theta, delta, sigma_eta } => (*gamma, *theta, *delta, *sigma_eta),
            _ => return None,
        };
        Some(LinearGaussianParams {
            mu: c.mu,
            phi: c.phi,
            beta0: c.beta0,
            sigma_eps: c.sigma_eps,
            gamma,
            theta,
            delta,
            sigma_eta,
            rho: self.rho,
        })
    }
}

/// Parameters of the bivariate linear-Gaussian autoregression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussianParams {
    pub mu: f64,
    pub phi: f64,
    pub beta0: f64,
    pub sigma_eps: f64,
    pub gamma: f64,
    pub theta: f64,
    pub delta: f64,
    pub sigma_eta: f64,
    pub rho: f64,
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("value must be finite, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("value must be positive, got {v}")))
    }
}

fn check_segments(path: &str, segs: &[Segment], values_positive: bool) -> Result<()> {
    for (i, s) in segs.iter().enumerate() {
        if s.from < 2 || (i > 0 && s.from <= segs[i - 1].from) {
            return Err(Error::config(
                format!("{path}[{i}].from"),
                "segment starts must be >= 2 and strictly ascending",
            ));
        }
        let p = format!("{path}[{i}].value");
        if values_positive {
            positive(&p, s.value)?;
        } else {
            finite(&p, s.value)?;
        }
    }
    Ok(())
}

fn validate_u(path: &str, u: &UProcess) -> Result<()> {
    match *u {
        UProcess::Zero => Ok(()),
        UProcess::IidNormal { sigma } | UProcess::RandomWalk { sigma } => positive(&format!("{path}.sigma"), sigma),
        UProcess::Ar1 { phi, sigma } => {
            finite(&format!("{path}.phi"), phi)?;
            positive(&format!("{path}.sigma"), sigma)
        }
        UProcess::Arch1 { omega, alpha } => {
            positive(&format!("{path}.omega"), omega)?;
            if !(0.0..1.0).contains(&alpha) {
                return Err(Error::config(format!("{path}.alpha"), format!("alpha must lie in [0, 1), got {alpha}")));
            }
            Ok(())
        }
    }
}
