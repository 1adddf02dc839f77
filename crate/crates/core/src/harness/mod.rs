//! Monte Carlo replication engine: simulate, estimate, and score estimators
//! against oracle targets over a grid of sample sizes.
//!
//! Replication `r` of every cell draws its noise from
//! `derive_streams(master_seed, r)`, and all reductions run over vectors kept
//! in replication order, so tables do not depend on the worker count.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bundle::{fmt17, PathBundle};
use crate::dgp::{draw_noise, simulate};
use crate::error::{Error, Result};
use crate::estimands::{irf_mc, regression_irf_linear_gaussian};
use crate::estimators::{
    bandwidth_rule, default_bandwidth_constant, ht_lagp, kernel_irf, kernel_lagp, lp_iv, lp_iv_plim_oracle, lp_ols,
    DensitySource, EstimateReport, KernelKind, KernelSpec, LpOptions, Regressor,
};
use crate::scenario::{ScenarioSpec, TreatmentMechanism};
use crate::seed::{derive_streams, DEFAULT_MASTER_SEED};
use crate::stats::{ks_distance_std_normal, mean, pairwise_sum};

/// Smallest replication count a plan document may request.
pub const MIN_REPLICATIONS: usize = 50;

const Z95: f64 = 1.959_963_984_540_054;

/// Where the plan's scenario lives: a path (relative to the plan file) or an
/// inline scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Path(PathBuf),
    Inline(Value),
}

fn gaussian() -> KernelKind {
    KernelKind::Gaussian
}

fn oracle_density() -> DensitySource {
    DensitySource::Oracle
}

fn treatment() -> Regressor {
    Regressor::Treatment
}

/// An estimator and its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorKind {
    HtLagp {
        p: usize,
        w: f64,
        wprime: f64,
    },
    KernelLagp {
        p: usize,
        w: f64,
        wprime: f64,
        #[serde(default = "gaussian")]
        kernel: KernelKind,
        /// `c` in `h = c (T - p)^(-1/5)`; `1.06 sd(W)` of each dataset when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bandwidth_constant: Option<f64>,
        #[serde(default = "oracle_density")]
        density: DensitySource,
    },
    KernelIrf {
        p: usize,
        w: f64,
        wprime: f64,
        #[serde(default = "gaussian")]
        kernel: KernelKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bandwidth_constant: Option<f64>,
    },
    LpOls {
        p: usize,
        #[serde(default)]
        demean: bool,
        #[serde(default = "treatment")]
        regressor: Regressor,
    },
    LpIv {
        p: usize,
    },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::HtLagp { .. } => "ht_lagp",
            EstimatorKind::KernelLagp { .. } => "kernel_lagp",
            EstimatorKind::KernelIrf { .. } => "kernel_irf",
            EstimatorKind::LpOls { .. } => "lp_ols",
            EstimatorKind::LpIv { .. } => "lp_iv",
        }
    }

    pub fn lag(&self) -> usize {
        match *self {
            EstimatorKind::HtLagp { p, .. }
            | EstimatorKind::KernelLagp { p, .. }
            | EstimatorKind::KernelIrf { p, .. }
            | EstimatorKind::LpOls { p, .. }
            | EstimatorKind::LpIv { p } => p,
        }
    }

    /// Treatment values contrasted; LP coefficients are per unit, so `(1, 0)`.
    pub fn contrast(&self) -> (f64, f64) {
        match *self {
            EstimatorKind::HtLagp { w, wprime, .. }
            | EstimatorKind::KernelLagp { w, wprime, .. }
            | EstimatorKind::KernelIrf { w, wprime, .. } => (w, wprime),
            EstimatorKind::LpOls { .. } | EstimatorKind::LpIv { .. } => (1.0, 0.0),
        }
    }

    /// Runs the estimator on one dataset.
    pub fn estimate(&self, bundle: &PathBundle) -> Result<EstimateReport> {
        let kernel_for = |kind: KernelKind, c: Option<f64>, p: usize| -> Result<KernelSpec> {
            let c = c.unwrap_or_else(|| default_bandwidth_constant(&bundle.w));
            KernelSpec::new(kind, bandwidth_rule(bundle.len(), p, c)?)
        };
        match *self {
            EstimatorKind::HtLagp { p, w, wprime } => ht_lagp(bundle, p, w, wprime),
            EstimatorKind::KernelLagp { p, w, wprime, kernel, bandwidth_constant, density } => {
                kernel_lagp(bundle, density, p, w, wprime, &kernel_for(kernel, bandwidth_constant, p)?)
            }
            EstimatorKind::KernelIrf { p, w, wprime, kernel, bandwidth_constant } => {
                kernel_irf(bundle, p, w, wprime, &kernel_for(kernel, bandwidth_constant, p)?)
            }
            EstimatorKind::LpOls { p, demean, regressor } => lp_ols(bundle, p, LpOptions { demean, regressor }),
            EstimatorKind::LpIv { p } => lp_iv(bundle, p),
        }
    }

    /// Rejects estimator/mechanism mismatches before any replication runs.
    pub fn check_applicable(&self, spec: &ScenarioSpec) -> Result<()> {
        let discrete = spec.treatment.is_discrete();
        let needs_instrument = match self {
            EstimatorKind::LpIv { .. } => true,
            EstimatorKind::LpOls { regressor, .. } => *regressor != Regressor::Treatment,
            _ => false,
        };
        match self {
            EstimatorKind::HtLagp { .. } if !discrete => Err(Error::NotApplicable(format!(
                "ht_lagp requires a discrete treatment mechanism, scenario has {}",
                spec.treatment.name()
            ))),
            EstimatorKind::KernelLagp { .. } | EstimatorKind::KernelIrf { .. } if discrete => {
                Err(Error::NotApplicable(format!(
                    "{} requires a continuous treatment mechanism, scenario has {}",
                    self.name(),
                    spec.treatment.name()
                )))
            }
            _ if needs_instrument && spec.instrument.is_none() => Err(Error::NotApplicable(format!(
                "missing instrument: {} needs the scenario's instrument block",
                self.name()
            ))),
            _ => Ok(()),
        }
    }
}

/// How a cell's oracle target is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Closed form for the estimator's probability limit, per horizon.
    #[default]
    Analytic,
    /// A fixed number.
    Value { value: f64 },
    /// Monte Carlo impulse response, computed once and reused for every horizon.
    IrfMc {
        draws: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burn_in: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Name in the metrics table; the estimator's name when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub target: TargetSpec,
}

impl EstimatorConfig {
    pub fn new(estimator: EstimatorKind, target: TargetSpec) -> Self {
        EstimatorConfig { label: None, estimator, target }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.estimator.name())
    }
}

fn default_parallelism() -> usize {
    1
}

fn default_seed() -> u64 {
    DEFAULT_MASTER_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenario: ScenarioRef,
    pub t_grid: Vec<usize>,
    pub replications: usize,
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
}

impl ExperimentPlan {
    /// Parses a plan document; scenario-dependent checks happen in [`ExperimentPlan::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| Error::Config { path: e.path().to_string(), message: e.into_inner().to_string() })
    }

    /// Reads a plan file and resolves its scenario, relative paths taken from
    /// the plan's directory. The returned plan has the scenario inlined.
    pub fn load(path: &Path) -> Result<(Self, ScenarioSpec)> {
        let text = fs::read_to_string(path)?;
        let mut plan = Self::parse(&text)?;
        let spec = plan.resolve_scenario(path.parent())?;
        plan.scenario = ScenarioRef::Inline(spec.to_json_value());
        plan.validate(&spec)?;
        Ok((plan, spec))
    }

    pub fn resolve_scenario(&self, base: Option<&Path>) -> Result<ScenarioSpec> {
        let text = match &self.scenario {
            ScenarioRef::Path(p) => {
                let full = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                fs::read_to_string(&full).map_err(|e| Error::config("scenario", format!("{}: {e}", full.display())))?
            }
            ScenarioRef::Inline(v) => v.to_string(),
        };
        ScenarioSpec::parse(&text).map_err(|e| match e {
            Error::Config { path, message } => Error::Config { path: format!("scenario.{path}"), message },
            other => other,
        })
    }

    /// Every invariant, including `replications >= MIN_REPLICATIONS`.
    pub fn validate(&self, spec: &ScenarioSpec) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::config(
                "replications",
                format!("need at least {MIN_REPLICATIONS} replications, got {}", self.replications),
            ));
        }
        self.check_structure(spec)
    }

    fn check_structure(&self, spec: &ScenarioSpec) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::config("t_grid", "grid is empty"));
        }
        if self.t_grid[0] < 2 || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("t_grid", "grid must be strictly ascending with every T >= 2"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "need at least one replication"));
        }
        if self.parallelism == 0 {
            return Err(Error::config("parallelism", "parallelism must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "no estimators given"));
        }
        let mut seen = BTreeSet::new();
        for (i, cfg) in self.estimators.iter().enumerate() {
            let p = cfg.estimator.lag();
            if !seen.insert((cfg.label().to_string(), p)) {
                return Err(Error::config(
                    format!("estimators[{i}].label"),
                    format!("duplicate estimator `{}` at p={p}; give each a distinct label", cfg.label()),
                ));
            }
            if p >= self.t_grid[0] {
                return Err(Error::config(format!("estimators[{i}].estimator.p"), "lag must be below every T"));
            }
            cfg.estimator.check_applicable(spec)?;
        }
        Ok(())
    }
}

/// Closed-form target for `est` at the horizon of `spec`.
pub fn analytic_target(spec: &ScenarioSpec, est: &EstimatorKind) -> Result<f64> {
    let p = est.lag();
    let (w, wp) = est.contrast();
    let t = spec.horizon;
    if p >= t {
        return Err(Error::Precondition(format!("need p < T, got p={p}, T={t}")));
    }
    let unavailable = |why: &str| Error::NotApplicable(format!("oracle unavailable for {} target: {why}", est.name()));
    let law = &spec.outcome_law;
    let independent = matches!(
        spec.treatment,
        TreatmentMechanism::ShockNormal { .. } | TreatmentMechanism::BernoulliIid { .. }
    ) && spec.rho == 0.0;
    let avg_beta = || mean(&(p + 1..=t).map(|s| law.beta(s, p)).collect::<Vec<_>>());
    match est {
        EstimatorKind::HtLagp { .. } | EstimatorKind::KernelLagp { .. } => {
            if !independent {
                return Err(unavailable("treatments must be independent of the past"));
            }
            Ok(avg_beta() * (w - wp))
        }
        EstimatorKind::KernelIrf { .. } => {
            if let Some(params) = spec.linear_gaussian_params() {
                return Ok(regression_irf_linear_gaussian(&params, p, w, wp)?.value);
            }
            if !independent {
                return Err(unavailable("treatments must be independent of the past"));
            }
            Ok(avg_beta() * (w - wp))
        }
        EstimatorKind::LpIv { .. } => Ok(lp_iv_plim_oracle(spec, p)?.target),
        EstimatorKind::LpOls { demean, regressor, .. } => {
            if !spec.treatment.is_shock() || spec.rho != 0.0 {
                return Err(unavailable("needs shocked treatments uncorrelated with outcome innovations"));
            }
            let sig2 = |s: usize| spec.treatment.sigma_eta_at(s).powi(2);
            let periods: Vec<(usize, usize)> = (p + 1..=t).map(|u| (u, u - p)).collect();
            let (num, den): (Vec<f64>, Vec<f64>) = match regressor {
                Regressor::Treatment => periods.iter().map(|&(u, s)| (law.beta(u, p) * sig2(s), sig2(s))).unzip(),
                Regressor::Instrument | Regressor::ScaledInstrument { .. } => {
                    let inst = spec.instrument.as_ref().ok_or_else(|| unavailable("missing instrument"))?;
                    let (a0, a1) = match *regressor {
                        Regressor::ScaledInstrument { alpha0, alpha1 } => (alpha0, alpha1),
                        _ => (0.0, 1.0),
                    };
                    let u = law.u_process();
                    let (shift, u_mean) = if *demean { (0.0, 0.0) } else { (inst.alpha0 - a0, law.u_mean()) };
                    periods
                        .iter()
                        .map(|&(v, s)| {
                            let a = inst.alpha1_at(s);
                            let n = (law.beta(v, p) * a * sig2(s) + inst.lambda * u.innovation_cross_moment(p)
                                + shift * u_mean)
                                / a1;
                            let d = (shift * shift
                                + a * a * sig2(s)
                                + inst.sigma_zeta.powi(2)
                                + inst.lambda.powi(2) * u.innovation_variance())
                                / (a1 * a1);
                            (n, d)
                        })
                        .unzip()
                }
            };
            Ok(pairwise_sum(&num) / pairwise_sum(&den))
        }
    }
}

/// Per-replication output of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub point: f64,
    pub std_error: f64,
}

/// Scores of one `(estimator, p, T)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellMetrics {
    pub estimator: String,
    pub t: usize,
    pub p: usize,
    pub target: f64,
    /// Monte Carlo error of the target itself; zero for closed forms.
    pub target_se: f64,
    pub replications: usize,
    /// Replications where the estimator returned an error; excluded from every statistic.
    pub failures: usize,
    pub mean: f64,
    pub bias: f64,
    /// Sampling standard deviation with divisor `M`.
    pub sd: f64,
    pub rmse: f64,
    pub coverage: f64,
    /// Replications left out of coverage and KS because their standard error is zero.
    pub coverage_excluded: usize,
    pub mean_se: f64,
    pub ks: f64,
}

impl CellMetrics {
    /// Scores replication results (in replication order) against `target`.
    pub fn from_results(estimator: &str, t: usize, p: usize, target: f64, target_se: f64, results: &[Result<ReplicationResult>]) -> Self {
        let ok: Vec<&ReplicationResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let points: Vec<f64> = ok.iter().map(|r| r.point).collect();
        let m = mean(&points);
        let sq = |c: f64| pairwise_sum(&points.iter().map(|x| (x - c) * (x - c)).collect::<Vec<_>>()) / points.len() as f64;
        let with_se: Vec<&&ReplicationResult> = ok.iter().filter(|r| r.std_error > 0.0).collect();
        let covered: Vec<f64> = with_se
            .iter()
            .map(|r| f64::from(((r.point - target).abs() <= Z95 * r.std_error) as u8))
            .collect();
        let z: Vec<f64> = with_se.iter().map(|r| (r.point - target) / r.std_error).collect();
        CellMetrics {
            estimator: estimator.to_string(),
            t,
            p,
            target,
            target_se,
            replications: results.len(),
            failures: results.len() - ok.len(),
            mean: m,
            bias: m - target,
            sd: sq(m).sqrt(),
            rmse: sq(target).sqrt(),
            coverage: mean(&covered),
            coverage_excluded: ok.len() - with_se.len(),
            mean_se: mean(&ok.iter().map(|r| r.std_error).collect::<Vec<_>>()),
            ks: if z.is_empty() { f64::NAN } else { normality_check(&z) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub cells: Vec<CellMetrics>,
}

impl MetricsTable {
    pub fn cell(&self, estimator: &str, p: usize, t: usize) -> Option<&CellMetrics> {
        self.cells.iter().find(|c| c.estimator == estimator && c.p == p && c.t == t)
    }

    /// Cells of one estimator in grid order.
    pub fn series(&self, estimator: &str, p: usize) -> Vec<&CellMetrics> {
        self.cells.iter().filter(|c| c.estimator == estimator && c.p == p).collect()
    }

    /// Writes `estimator,T,p,mean,bias,sd,rmse,coverage,mean_se,ks`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["estimator", "T", "p", "mean", "bias", "sd", "rmse", "coverage", "mean_se", "ks"])?;
        for c in &self.cells {
            wtr.write_record([
                c.estimator.clone(),
                c.t.to_string(),
                c.p.to_string(),
                fmt17(c.mean),
                fmt17(c.bias),
                fmt17(c.sd),
                fmt17(c.rmse),
                fmt17(c.coverage),
                fmt17(c.mean_se),
                fmt17(c.ks),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs one simulate-then-estimate pipeline: replication `rep` at horizon `t`.
pub fn run_pipeline(plan: &ExperimentPlan, spec: &ScenarioSpec, t: usize, rep: u64) -> Vec<Result<EstimateReport>> {
    let spec_t = spec.with_horizon(t);
    let panel = draw_noise(&spec_t, &derive_streams(plan.master_seed, rep));
    let bundle = simulate(&spec_t, &panel);
    plan.estimators.iter().map(|cfg| cfg.estimator.estimate(&bundle)).collect()
}

fn target_for(cfg: &EstimatorConfig, spec: &ScenarioSpec, t: usize, seed: u64) -> Result<(f64, f64)> {
    match &cfg.target {
        TargetSpec::Value { value } => Ok((*value, 0.0)),
        TargetSpec::Analytic => Ok((analytic_target(&spec.with_horizon(t), &cfg.estimator)?, 0.0)),
        TargetSpec::IrfMc { draws, burn_in } => {
            let (w, wp) = cfg.estimator.contrast();
            let v = irf_mc(spec, cfg.estimator.lag(), w, wp, *draws, burn_in.unwrap_or(spec.burn_in), seed)?;
            Ok((v.value, v.mc_se))
        }
    }
}

/// Seed offset for Monte Carlo targets, keeping them off the replication streams.
const TARGET_SEED_SALT: u64 = 0x7a26_e7f0_0c1e_5eed;

/// Runs every cell of the plan. Structural invariants are checked, but
/// `replications` may be below [`MIN_REPLICATIONS`] for programmatic use.
pub fn run_replications(plan: &ExperimentPlan, spec: &ScenarioSpec) -> Result<MetricsTable> {
    plan.check_structure(spec)?;
    let target_seed = plan.master_seed ^ TARGET_SEED_SALT;
    let mut targets: Vec<Vec<(f64, f64)>> = Vec::with_capacity(plan.estimators.len());
    for cfg in &plan.estimators {
        let row = match cfg.target {
            TargetSpec::IrfMc { .. } => {
                let v = target_for(cfg, spec, plan.t_grid[0], target_seed)?;
                vec![v; plan.t_grid.len()]
            }
            _ => plan.t_grid.iter().map(|&t| target_for(cfg, spec, t, target_seed)).collect::<Result<_>>()?,
        };
        targets.push(row);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    let mut cells = Vec::with_capacity(plan.estimators.len() * plan.t_grid.len());
    let mut by_estimator: Vec<Vec<CellMetrics>> = vec![Vec::new(); plan.estimators.len()];
    for (ti, &t) in plan.t_grid.iter().enumerate() {
        let runs: Vec<Vec<Result<EstimateReport>>> = pool.install(|| {
            (0..plan.replications as u64).into_par_iter().map(|r| run_pipeline(plan, spec, t, r)).collect()
        });
        for (ei, cfg) in plan.estimators.iter().enumerate() {
            let results: Vec<Result<ReplicationResult>> = runs
                .iter()
                .map(|row| match &row[ei] {
                    Ok(r) => Ok(ReplicationResult { point: r.point, std_error: r.std_error }),
                    Err(e) => Err(Error::Numerical(e.to_string())),
                })
                .collect();
            let (target, target_se) = targets[ei][ti];
            by_estimator[ei].push(CellMetrics::from_results(
                cfg.label(),
                t,
                cfg.estimator.lag(),
                target,
                target_se,
                &results,
            ));
        }
    }
    for group in by_estimator {
        cells.extend(group);
    }
    Ok(MetricsTable { cells })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSlope {
    pub estimator: String,
    pub p: usize,
    pub slope: f64,
    pub std_error: f64,
    pub points: usize,
}

/// Least-squares slope of `log RMSE` on `log T` with its regression standard error.
pub fn rate_slope(table: &MetricsTable, estimator: &str, p: usize) -> Result<RateSlope> {
    let series = table.series(estimator, p);
    let pts: Vec<(f64, f64)> = series.iter().map(|c| ((c.t as f64).ln(), c.rmse.ln())).collect();
    let (slope, std_error) = log_log_fit(&pts)?;
    Ok(RateSlope { estimator: estimator.to_string(), p, slope, std_error, points: pts.len() })
}

fn log_log_fit(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pts.len() < 4 {
        return Err(Error::Precondition(format!("rate slope needs at least 4 grid points, got {}", pts.len())));
    }
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::Numerical("RMSE must be positive and finite to take logs".into()));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx = pairwise_sum(&xs.iter().map(|x| (x - mx) * (x - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let ssr = pairwise_sum(&xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).collect::<Vec<_>>());
    Ok((slope, (ssr / (n - 2.0) / sxx).sqrt()))
}

/// Slopes for every estimator with at least four grid points.
pub fn rate_slopes(table: &MetricsTable) -> Vec<RateSlope> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for c in &table.cells {
        if !keys.iter().any(|(e, p)| *e == c.estimator && *p == c.p) {
            keys.push((c.estimator.clone(), c.p));
        }
    }
    keys.iter().filter_map(|(e, p)| rate_slope(table, e, *p).ok()).collect()
}

pub fn write_rate_slopes_csv<W: Write>(slopes: &[RateSlope], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["estimator", "p", "slope", "se", "points"])?;
    for s in slopes {
        wtr.write_record([s.estimator.clone(), s.p.to_string(), fmt17(s.slope), fmt17(s.std_error), s.points.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub estimator: String,
    pub t: usize,
    pub p: usize,
    pub coverage: f64,
    pub used: usize,
    pub excluded_zero_se: usize,
}

pub fn coverage(table: &MetricsTable) -> Vec<CoverageSummary> {
    table
        .cells
        .iter()
        .map(|c| CoverageSummary {
            estimator: c.estimator.clone(),
            t: c.t,
            p: c.p,
            coverage: c.coverage,
            used: c.replications - c.failures - c.coverage_excluded,
            excluded_zero_se: c.coverage_excluded,
        })
        .collect()
}

/// Kolmogorov-Smirnov distance of standardized errors to N(0,1).
pub fn normality_check(standardized: &[f64]) -> f64 {
    ks_distance_std_normal(standardized)
}

/// Provenance record written next to experiment outputs.
pub fn experiment_manifest(plan: &ExperimentPlan, spec: &ScenarioSpec) -> Value {
    let mut plan = plan.clone();
    plan.scenario = ScenarioRef::Inline(spec.to_json_value());
    json!({
        "kind": "experiment",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "scenario_hash": spec.content_hash(),
        "master_seed": plan.master_seed,
        "plan": plan,
    })
}

/// Writes `metrics.csv`, `rate_slopes.csv` and `manifest.json` into `dir`.
/// The worker count is left out of the manifest since it cannot change results.
pub fn write_experiment(dir: &Path, plan: &ExperimentPlan, spec: &ScenarioSpec, table: &MetricsTable) -> Result<()> {
    fs::create_dir_all(dir)?;
    table.write_csv(fs::File::create(dir.join("metrics.csv"))?)?;
    write_rate_slopes_csv(&rate_slopes(table), fs::File::create(dir.join("rate_slopes.csv"))?)?;
    let mut manifest = experiment_manifest(plan, spec);
    if let Some(p) = manifest.get_mut("plan").and_then(Value::as_object_mut) {
        p.remove("parallelism");
    }
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}
