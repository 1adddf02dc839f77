//! Ground-truth causal quantities, by exact enumeration, closed form or
//! Monte Carlo over counterfactual continuations.

mod exact;
mod linear;

pub use exact::{ExactEnumeration, HtVarianceOracle, MAX_ENUMERATION_HORIZON};
pub use linear::{crf_analytic, crf_linear_gaussian, regression_irf_linear_gaussian, spectral_radius};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::fmt17;
use crate::dgp::{check_support, forward_core, propensity, replay_outcome, ForwardDraws, ForwardMode, World};
use crate::error::{Error, Result};
use crate::scenario::{BetaSchedule, OutcomeLaw, ScenarioSpec, TreatmentMechanism};
use crate::seed::{derive_streams, SeedStream};
use crate::stats::{mean, pairwise_sum, variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimandMethod {
    ExactEnumeration,
    Analytic,
    MonteCarlo,
}

impl EstimandMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimandMethod::ExactEnumeration => "exact-enumeration",
            EstimandMethod::Analytic => "analytic",
            EstimandMethod::MonteCarlo => "monte-carlo",
        }
    }
}

/// Which causal quantity a value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimandLabel {
    /// Lag-p effect along explicit continuations.
    Tau,
    /// Weighted causal effect.
    TauStar,
    Crf,
    AvgTauStar,
    AvgCrf,
    Irf,
    /// Time-t projection coefficient.
    BetaL,
    /// Pooled projection coefficient.
    BetaU,
    /// Pooled projection implied by the coefficient table.
    BetaUStar,
    /// Limit of the LP-IV ratio.
    BetaIv,
    /// Population regression of `Y_t` on `W_{t-p}` under the stationary law.
    RegressionIrf,
}

impl EstimandLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimandLabel::Tau => "tau",
            EstimandLabel::TauStar => "tau_star",
            EstimandLabel::Crf => "crf",
            EstimandLabel::AvgTauStar => "avg_tau_star",
            EstimandLabel::AvgCrf => "avg_crf",
            EstimandLabel::Irf => "irf",
            EstimandLabel::BetaL => "beta_l",
            EstimandLabel::BetaU => "beta_u",
            EstimandLabel::BetaUStar => "beta_u_star",
            EstimandLabel::BetaIv => "beta_iv",
            EstimandLabel::RegressionIrf => "regression_irf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimandValue {
    pub label: EstimandLabel,
    /// Period, for per-period estimands.
    pub t: Option<usize>,
    pub p: usize,
    pub w: f64,
    pub wprime: f64,
    pub value: f64,
    pub method: EstimandMethod,
    pub mc_draws: u64,
    pub mc_se: f64,
}

impl EstimandValue {
    fn exact(label: EstimandLabel, t: Option<usize>, p: usize, w: f64, wprime: f64, value: f64) -> Self {
        EstimandValue { label, t, p, w, wprime, value, method: EstimandMethod::ExactEnumeration, mc_draws: 0, mc_se: 0.0 }
    }

    pub(crate) fn analytic(label: EstimandLabel, t: Option<usize>, p: usize, w: f64, wprime: f64, value: f64) -> Self {
        EstimandValue { method: EstimandMethod::Analytic, ..Self::exact(label, t, p, w, wprime, value) }
    }
}

/// Writes `label,t,p,w,wprime,value,method,mc_draws,mc_se` rows.
pub fn write_estimands_csv<W: Write>(rows: &[EstimandValue], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["label", "t", "p", "w", "wprime", "value", "method", "mc_draws", "mc_se"])?;
    for r in rows {
        wtr.write_record([
            r.label.as_str().to_string(),
            r.t.map(|t| t.to_string()).unwrap_or_default(),
            r.p.to_string(),
            fmt17(r.w),
            fmt17(r.wprime),
            fmt17(r.value),
            r.method.as_str().to_string(),
            r.mc_draws.to_string(),
            fmt17(r.mc_se),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn check_lag(t: usize, p: usize, horizon: usize) -> Result<()> {
    if p >= t || t > horizon {
        return Err(Error::Precondition(format!("need p < t <= T, got p={p}, t={t}, T={horizon}")));
    }
    Ok(())
}

/// Treatments after `W_{t-p}` along which a lag-p effect is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Continuation {
    /// The factual `W_{t-p+1:t}`.
    Observed,
    Path(Vec<f64>),
}

/// Lag-p effect: replay with `W_{t-p} = w` followed by `cont`, minus replay
/// with `w'` followed by `cont_prime`, history before `t-p` factual.
pub fn lag_p_effect(
    world: &World,
    t: usize,
    p: usize,
    w: f64,
    wprime: f64,
    cont: &Continuation,
    cont_prime: &Continuation,
) -> Result<EstimandValue> {
    check_lag(t, p, world.horizon())?;
    check_support(&world.spec, w)?;
    check_support(&world.spec, wprime)?;
    let path = |head: f64, c: &Continuation| -> Result<Vec<f64>> {
        let tail = match c {
            Continuation::Observed => &world.factual.w[t - p..t],
            Continuation::Path(v) if v.len() == p => v.as_slice(),
            Continuation::Path(v) => {
                return Err(Error::Precondition(format!("continuation has length {} but p = {p}", v.len())))
            }
        };
        let mut out = world.factual.w[..t - p - 1].to_vec();
        out.push(head);
        out.extend_from_slice(tail);
        Ok(out)
    };
    let a = replay_outcome(&world.spec, &world.panel, &path(w, cont)?)?;
    let b = replay_outcome(&world.spec, &world.panel, &path(wprime, cont_prime)?)?;
    Ok(EstimandValue::exact(EstimandLabel::Tau, Some(t), p, w, wprime, a[t - 1] - b[t - 1]))
}

/// How a weighted effect is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectMode {
    MonteCarlo { draws: usize },
    /// Sum over every binary continuation; discrete mechanisms only.
    Exact,
}

const CHUNK: usize = 1024;

fn substream_key(t: usize, p: usize, tag: u64) -> u64 {
    ((t as u64) << 32) ^ ((p as u64) << 8) ^ tag
}

/// Common-random-number Monte Carlo of `Y_t(w) - Y_t(w')` after forcing
/// `W_{t-p}`; one forward draw set is shared by both arms.
#[allow(clippy::too_many_arguments)]
fn mc_contrast(world: &World, t: usize, p: usize, w: f64, wprime: f64, m: usize, mode: ForwardMode, base: SeedStream) -> (f64, f64) {
    let t0 = t - p;
    let rho = world.spec.rho;
    let chunks: Vec<Vec<f64>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = base.substream(c as u64).rng();
            let n = CHUNK.min(m - c * CHUNK);
            let mut hist = Vec::with_capacity(t);
            let mut ys = Vec::with_capacity(p + 1);
            (0..n)
                .map(|_| {
                    let d = ForwardDraws::draw(&mut rng, p + 1, rho);
                    let mut arm = |x: f64| {
                        hist.clear();
                        hist.extend_from_slice(&world.factual.w[..t0 - 1]);
                        ys.clear();
                        forward_core(world, t0, x, t, &d, mode, &mut hist, &mut ys)
                    };
                    arm(w) - arm(wprime)
                })
                .collect()
        })
        .collect();
    let diffs = chunks.concat();
    summarize(&diffs)
}

fn summarize(diffs: &[f64]) -> (f64, f64) {
    let m = diffs.len();
    let se = if m < 2 { 0.0 } else { (variance(diffs) / m as f64).sqrt() };
    (mean(diffs), se)
}

fn mode_tag(mode: ForwardMode) -> u64 {
    match mode {
        ForwardMode::WeightedEffect => 1,
        ForwardMode::Crf => 2,
    }
}

/// Weighted causal effect at `t`: mean over forward treatment draws of `Y_t`
/// given `W_{t-p} = w`, minus the same at `w'`, potential outcomes fixed.
pub fn weighted_effect(world: &World, t: usize, p: usize, w: f64, wprime: f64, mode: EffectMode) -> Result<EstimandValue> {
    check_lag(t, p, world.horizon())?;
    check_support(&world.spec, w)?;
    check_support(&world.spec, wprime)?;
    match mode {
        EffectMode::Exact => {
            if !world.spec.treatment.is_discrete() {
                return Err(Error::NotApplicable("exact requires discrete mechanism".into()));
            }
            let v = exact_arm(world, t, p, w)? - exact_arm(world, t, p, wprime)?;
            Ok(EstimandValue::exact(EstimandLabel::TauStar, Some(t), p, w, wprime, v))
        }
        EffectMode::MonteCarlo { draws } => {
            if draws == 0 {
                return Err(Error::Precondition("Monte Carlo needs at least one draw".into()));
            }
            if p == 0 {
                let v = lag_p_effect(world, t, 0, w, wprime, &Continuation::Path(vec![]), &Continuation::Path(vec![]))?;
                return Ok(EstimandValue { label: EstimandLabel::TauStar, ..v });
            }
            let base = world.streams.counterfactual.substream(substream_key(t, p, mode_tag(ForwardMode::WeightedEffect)));
            let (v, se) = mc_contrast(world, t, p, w, wprime, draws, ForwardMode::WeightedEffect, base);
            Ok(mc_value(EstimandLabel::TauStar, Some(t), p, w, wprime, v, draws, se))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn mc_value(label: EstimandLabel, t: Option<usize>, p: usize, w: f64, wprime: f64, value: f64, draws: usize, se: f64) -> EstimandValue {
    EstimandValue { label, t, p, w, wprime, value, method: EstimandMethod::MonteCarlo, mc_draws: draws as u64, mc_se: se }
}

/// `E[Y_t | history, W_{t-p} = w]` with potential outcomes fixed, summing over
/// all `2^p` binary continuations weighted by mechanism probabilities.
fn exact_arm(world: &World, t: usize, p: usize, w: f64) -> Result<f64> {
    let spec = &world.spec;
    let mut path = world.factual.w[..t - p - 1].to_vec();
    path.push(w);
    path.resize(t, 0.0);
    let mut acc = Vec::with_capacity(1 << p);
    for mask in 0..(1usize << p) {
        for k in 0..p {
            path[t - p + k] = f64::from(((mask >> k) & 1) as u8);
        }
        let y = replay_outcome(spec, &world.panel, &path)?;
        let mut prob = 1.0;
        for s in (t - p + 1)..=t {
            prob *= propensity(spec, &path[..s - 1], &y[..s - 1], path[s - 1]);
        }
        acc.push(prob * y[t - 1]);
    }
    Ok(pairwise_sum(&acc))
}

/// Minimum Monte Carlo size for conditional response functions.
pub const MIN_CRF_DRAWS: usize = 100;

/// Causal response function at `t` given the world's factual history before
/// `t - p`; outcome noise on `[t-p, t]` is redrawn.
pub fn crf(world: &World, t: usize, p: usize, w: f64, wprime: f64, draws: usize) -> Result<EstimandValue> {
    check_lag(t, p, world.horizon())?;
    check_support(&world.spec, w)?;
    check_support(&world.spec, wprime)?;
    if draws < MIN_CRF_DRAWS {
        return Err(Error::Precondition(format!("crf needs at least {MIN_CRF_DRAWS} draws, got {draws}")));
    }
    let base = world.streams.counterfactual.substream(substream_key(t, p, mode_tag(ForwardMode::Crf)));
    let (v, se) = mc_contrast(world, t, p, w, wprime, draws, ForwardMode::Crf, base);
    Ok(mc_value(EstimandLabel::Crf, Some(t), p, w, wprime, v, draws, se))
}

fn average(label: EstimandLabel, p: usize, w: f64, wprime: f64, per_t: Vec<EstimandValue>) -> EstimandValue {
    let n = per_t.len() as f64;
    let vals: Vec<f64> = per_t.iter().map(|v| v.value).collect();
    let var: Vec<f64> = per_t.iter().map(|v| v.mc_se * v.mc_se).collect();
    let method = if per_t.iter().any(|v| v.method == EstimandMethod::MonteCarlo) {
        EstimandMethod::MonteCarlo
    } else {
        per_t[0].method
    };
    EstimandValue {
        label,
        t: None,
        p,
        w,
        wprime,
        value: mean(&vals),
        method,
        mc_draws: per_t.iter().map(|v| v.mc_draws).max().unwrap_or(0),
        mc_se: pairwise_sum(&var).sqrt() / n,
    }
}

/// Average over `t = p+1..=T` of the weighted causal effect.
pub fn avg_weighted_effect(world: &World, p: usize, w: f64, wprime: f64, mode: EffectMode) -> Result<EstimandValue> {
    check_lag(p + 1, p, world.horizon())?;
    let per_t: Result<Vec<_>> =
        (p + 1..=world.horizon()).into_par_iter().map(|t| weighted_effect(world, t, p, w, wprime, mode)).collect();
    Ok(average(EstimandLabel::AvgTauStar, p, w, wprime, per_t?))
}

/// Average over `t = p+1..=T` of the causal response function.
pub fn avg_crf(world: &World, p: usize, w: f64, wprime: f64, draws: usize) -> Result<EstimandValue> {
    check_lag(p + 1, p, world.horizon())?;
    let per_t: Result<Vec<_>> = (p + 1..=world.horizon()).into_par_iter().map(|t| crf(world, t, p, w, wprime, draws)).collect();
    Ok(average(EstimandLabel::AvgCrf, p, w, wprime, per_t?))
}

/// Rejects specs without a time-invariant stationary law.
pub fn check_stationary(spec: &ScenarioSpec) -> Result<()> {
    let u = spec.outcome_law.u_process();
    if !u.is_stationary() {
        return Err(Error::NotApplicable(
            "stationary-regime estimands need a stationary treatment-free component (no random walk, |phi| < 1)".into(),
        ));
    }
    if let TreatmentMechanism::ShockNormal { sigma_eta_segments, .. } = &spec.treatment {
        if !sigma_eta_segments.is_empty() {
            return Err(Error::NotApplicable("time-varying treatment scale has no stationary law".into()));
        }
    }
    if let OutcomeLaw::LinearGeneral(g) = &spec.outcome_law {
        if !matches!(g.beta, BetaSchedule::Constant(_)) {
            return Err(Error::NotApplicable("time-varying coefficients have no stationary law".into()));
        }
    }
    if let Some(params) = spec.linear_gaussian_params() {
        let r = spectral_radius(&params);
        if r >= 1.0 {
            return Err(Error::Explosive { spectral_radius: r });
        }
    } else if let TreatmentMechanism::PolicyRule { theta, delta, .. } = spec.treatment {
        if theta.abs() >= 1.0 || delta != 0.0 && !matches!(spec.outcome_law, OutcomeLaw::LinearAr(_)) {
            return Err(Error::NotApplicable("cannot certify stationarity of this feedback rule".into()));
        }
    }
    Ok(())
}

/// Impulse response: the causal response function averaged over stationary
/// histories. Each draw simulates a fresh history of `burn_in` periods, then
/// one common-random-number contrast at lag `p`.
pub fn irf_mc(spec: &ScenarioSpec, p: usize, w: f64, wprime: f64, draws: usize, burn_in: usize, seed: u64) -> Result<EstimandValue> {
    check_stationary(spec)?;
    check_support(spec, w)?;
    check_support(spec, wprime)?;
    if draws < MIN_CRF_DRAWS {
        return Err(Error::Precondition(format!("irf needs at least {MIN_CRF_DRAWS} draws, got {draws}")));
    }
    let t = burn_in + p + 1;
    let diffs: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let world = World::with_len(spec, derive_streams(seed, i), t);
            let mut rng = world.streams.counterfactual.substream(substream_key(t, p, 3)).rng();
            let d = ForwardDraws::draw(&mut rng, p + 1, spec.rho);
            let (mut hist, mut ys) = (Vec::with_capacity(t), Vec::with_capacity(p + 1));
            let mut arm = |x: f64| {
                hist.clear();
                hist.extend_from_slice(&world.factual.w[..t - p - 1]);
                ys.clear();
                forward_core(&world, t - p, x, t, &d, ForwardMode::Crf, &mut hist, &mut ys)
            };
            arm(w) - arm(wprime)
        })
        .collect();
    let (v, se) = summarize(&diffs);
    Ok(mc_value(EstimandLabel::Irf, None, p, w, wprime, v, draws, se))
}

/// Projection coefficients of outcomes on lagged treatments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaProjections {
    /// `beta^L_{t,p}` for `t = p+1..=T`.
    pub beta_l: Vec<EstimandValue>,
    pub beta_u: EstimandValue,
    /// Coefficient-table identity, for linear outcome laws.
    pub beta_u_star: EstimandValue,
}

/// Sample-moment projections over `n` independent replications.
pub fn beta_projections(spec: &ScenarioSpec, p: usize, n: usize, seed: u64) -> Result<BetaProjections> {
    if !spec.treatment.is_shock() {
        return Err(Error::NotApplicable(
            "projection targets are defined for shocked treatments (zero conditional mean given the past)".into(),
        ));
    }
    let horizon = spec.horizon;
    check_lag(p + 1, p, horizon)?;
    if n < 2 {
        return Err(Error::Precondition("need at least two replications".into()));
    }
    // per replication: (Y_t W_{t-p}, W_{t-p}^2) for each t
    let reps: Vec<(Vec<f64>, Vec<f64>)> = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let world = World::new(spec, derive_streams(seed, r));
            let b = &world.factual;
            let num = (p + 1..=horizon).map(|t| b.y[t - 1] * b.w[t - p - 1]).collect();
            let den = (p + 1..=horizon).map(|t| b.w[t - p - 1] * b.w[t - p - 1]).collect();
            (num, den)
        })
        .collect();
    let ratio = |a: &[f64], d: &[f64]| -> (f64, f64) {
        let (sa, sd) = (pairwise_sum(a), pairwise_sum(d));
        let r = sa / sd;
        let sc: Vec<f64> = a.iter().zip(d).map(|(x, y)| (x - r * y).powi(2)).collect();
        (r, pairwise_sum(&sc).sqrt() / sd.abs())
    };
    let mut beta_l = Vec::with_capacity(horizon - p);
    for (k, t) in (p + 1..=horizon).enumerate() {
        let a: Vec<f64> = reps.iter().map(|r| r.0[k]).collect();
        let d: Vec<f64> = reps.iter().map(|r| r.1[k]).collect();
        let (v, se) = ratio(&a, &d);
        beta_l.push(mc_value(EstimandLabel::BetaL, Some(t), p, 1.0, 0.0, v, n, se));
    }
    let a: Vec<f64> = reps.iter().map(|r| pairwise_sum(&r.0)).collect();
    let d: Vec<f64> = reps.iter().map(|r| pairwise_sum(&r.1)).collect();
    let (v, se) = ratio(&a, &d);
    let beta_u = mc_value(EstimandLabel::BetaU, None, p, 1.0, 0.0, v, n, se);

    let mut num = Vec::with_capacity(horizon - p);
    let mut den = Vec::with_capacity(horizon - p);
    for t in p + 1..=horizon {
        let s2 = spec.treatment.sigma_eta_at(t - p).powi(2);
        num.push(spec.outcome_law.beta(t, p) * s2);
        den.push(s2);
    }
    let star = pairwise_sum(&num) / pairwise_sum(&den);
    let beta_u_star = EstimandValue::analytic(EstimandLabel::BetaUStar, None, p, 1.0, 0.0, star);
    Ok(BetaProjections { beta_l, beta_u, beta_u_star })
}

#[cfg(test)]
mod tests;
