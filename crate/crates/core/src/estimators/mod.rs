//! Estimators of dynamic causal effects from one realized path, with standard
//! errors and diagnostics.

mod kernel;
mod lp;

pub use kernel::{bandwidth_rule, default_bandwidth_constant, kernel_moment, KernelKind, KernelSpec};
pub use lp::{lp_iv, lp_iv_plim_oracle, lp_ols, LpOptions, PlimOracle, Regressor};

pub use crate::estimands::HtVarianceOracle;

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::bundle::{fmt17, PathBundle, TreatmentKind};
use crate::dgp::NoisePanel;
use crate::error::{Error, Result};
use crate::estimands::ExactEnumeration;
use crate::scenario::ScenarioSpec;
use crate::stats::{mean, pairwise_sum, variance_pop};

/// Discrete propensities below this are treated as overlap failures.
pub const PROPENSITY_FLOOR: f64 = 1e-6;
/// Continuous densities below this drop the term.
pub const DENSITY_FLOOR: f64 = 1e-8;
/// Minimum Kish effective sample at each evaluation point of `kernel_irf`.
pub const MIN_EFFECTIVE_SAMPLE: f64 = 5.0;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub p: usize,
    pub point: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub diagnostics: BTreeMap<String, Value>,
}

impl EstimateReport {
    pub(crate) fn new(estimator: &str, p: usize, point: f64, std_error: f64, diagnostics: BTreeMap<String, Value>) -> Self {
        let half = Z95 * std_error;
        EstimateReport {
            estimator: estimator.to_string(),
            p,
            point,
            std_error,
            ci_low: point - half,
            ci_high: point + half,
            diagnostics,
        }
    }

    pub fn covers(&self, target: f64) -> bool {
        self.ci_low <= target && target <= self.ci_high
    }
}

/// Writes `estimator,p,point,se,ci_low,ci_high,diag_json` rows.
pub fn write_reports_csv<W: Write>(rows: &[EstimateReport], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["estimator", "p", "point", "se", "ci_low", "ci_high", "diag_json"])?;
    for r in rows {
        wtr.write_record([
            r.estimator.clone(),
            r.p.to_string(),
            fmt17(r.point),
            fmt17(r.std_error),
            fmt17(r.ci_low),
            fmt17(r.ci_high),
            serde_json::to_string(&r.diagnostics)?,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub(crate) fn check_lag(bundle: &PathBundle, p: usize) -> Result<usize> {
    let n = bundle.len();
    if p >= n {
        return Err(Error::Precondition(format!("need p < T, got p={p}, T={n}")));
    }
    Ok(n - p)
}

fn mean_and_se(terms: &[f64]) -> (f64, f64) {
    (mean(terms), (variance_pop(terms) / terms.len() as f64).sqrt())
}

/// Horvitz-Thompson lag-p estimator for binary treatments.
pub fn ht_lagp(bundle: &PathBundle, p: usize, w: f64, wprime: f64) -> Result<EstimateReport> {
    if bundle.kind != TreatmentKind::Discrete {
        return Err(Error::NotApplicable("HT estimator requires a discrete treatment".into()));
    }
    let n = check_lag(bundle, p)?;
    let mut terms = Vec::with_capacity(n);
    let mut min_prop = f64::INFINITY;
    for t in p + 1..=bundle.len() {
        let s = t - p - 1;
        let x = bundle.w[s];
        let pr = bundle.propensity[s];
        if pr.is_nan() || pr < PROPENSITY_FLOOR {
            return Err(Error::Overlap { t: s + 1, value: pr, floor: PROPENSITY_FLOOR });
        }
        min_prop = min_prop.min(pr);
        let ind = f64::from((x == w) as u8) - f64::from((x == wprime) as u8);
        terms.push(bundle.y[t - 1] * ind / pr);
    }
    let (point, se) = mean_and_se(&terms);
    let diag = BTreeMap::from([
        ("effective_sample".to_string(), json!(n)),
        ("min_propensity".to_string(), json!(min_prop)),
        ("propensity_floor_trips".to_string(), json!(0)),
    ]);
    Ok(EstimateReport::new("ht_lagp", p, point, se, diag))
}

/// Conditional second-moment expression for the HT terms, evaluated exactly
/// by enumerating every treatment path against `panel`.
pub fn ht_variance_oracle(spec: &ScenarioSpec, panel: &NoisePanel, p: usize, w: f64, wprime: f64) -> Result<HtVarianceOracle> {
    ExactEnumeration::new(spec, panel)?.ht_variance_oracle(p, w, wprime)
}

/// Where the kernel estimator takes `f_{t-p}(W_{t-p})` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensitySource {
    /// The bundle's recorded mechanism density.
    Oracle,
    /// Gaussian kernel density estimate of the marginal treatment law.
    Estimated,
}

fn estimated_density(w: &[f64]) -> Vec<f64> {
    let h = default_bandwidth_constant(w) * (w.len() as f64).powf(-0.2);
    let k = KernelSpec { kind: KernelKind::Gaussian, h };
    w.iter()
        .map(|x| {
            let vals: Vec<f64> = w.iter().map(|y| k.kh(x - y)).collect();
            pairwise_sum(&vals) / w.len() as f64
        })
        .collect()
}

/// Per-period terms `Y_t k_h(W_{t-p} - w) / f_{t-p}(W_{t-p})`; `None` where
/// the density is below the floor.
pub fn kernel_terms(bundle: &PathBundle, density: &[f64], p: usize, w: f64, kernel: &KernelSpec) -> Vec<Option<f64>> {
    (p + 1..=bundle.len())
        .map(|t| {
            let s = t - p - 1;
            let f = density[s];
            (f >= DENSITY_FLOOR).then(|| bundle.y[t - 1] * kernel.kh(bundle.w[s] - w) / f)
        })
        .collect()
}

/// Kernel-weighted lag-p estimator for continuous treatments.
pub fn kernel_lagp(
    bundle: &PathBundle,
    source: DensitySource,
    p: usize,
    w: f64,
    wprime: f64,
    kernel: &KernelSpec,
) -> Result<EstimateReport> {
    if bundle.kind != TreatmentKind::Continuous {
        return Err(Error::NotApplicable("kernel estimator requires a continuous treatment".into()));
    }
    let n = check_lag(bundle, p)?;
    let density = match source {
        DensitySource::Oracle => bundle.propensity.clone(),
        DensitySource::Estimated => estimated_density(&bundle.w),
    };
    let a = kernel_terms(bundle, &density, p, w, kernel);
    let b = kernel_terms(bundle, &density, p, wprime, kernel);
    let terms: Vec<f64> = a.iter().zip(&b).filter_map(|(x, y)| Some((*x)? - (*y)?)).collect();
    let trips = n - terms.len();
    if terms.is_empty() {
        return Err(Error::Numerical("every kernel term fell below the density floor".into()));
    }
    let (point, se) = mean_and_se(&terms);
    let diag = BTreeMap::from([
        ("bandwidth".to_string(), json!(kernel.h)),
        ("kernel".to_string(), json!(kernel.kind.name())),
        ("density_source".to_string(), json!(source)),
        ("effective_sample".to_string(), json!(terms.len())),
        ("density_floor_trips".to_string(), json!(trips)),
    ]);
    Ok(EstimateReport::new("kernel_lagp", p, point, se, diag))
}

struct NwPoint {
    m: f64,
    var: f64,
    ess: f64,
    f: f64,
}

fn nadaraya_watson(x: &[f64], y: &[f64], at: f64, kernel: &KernelSpec) -> NwPoint {
    let k: Vec<f64> = x.iter().map(|v| kernel.kh(v - at)).collect();
    let sk = pairwise_sum(&k);
    let sk2 = pairwise_sum(&k.iter().map(|v| v * v).collect::<Vec<_>>());
    // centring on y[0] keeps a constant response exactly constant
    let y0 = y[0];
    let num: Vec<f64> = k.iter().zip(y).map(|(a, b)| a * (b - y0)).collect();
    let m = y0 + pairwise_sum(&num) / sk;
    let res: Vec<f64> = k.iter().zip(y).map(|(a, b)| a * (b - m) * (b - m)).collect();
    let sigma2 = pairwise_sum(&res) / sk;
    let n = x.len() as f64;
    let f = sk / n;
    NwPoint { m, var: kernel.roughness() * sigma2 / (n * kernel.h * f), ess: sk * sk / sk2, f }
}

/// Nadaraya-Watson regression of `Y_t` on `W_{t-p}` at `w` minus at `w'`,
/// density estimated from the sample.
pub fn kernel_irf(bundle: &PathBundle, p: usize, w: f64, wprime: f64, kernel: &KernelSpec) -> Result<EstimateReport> {
    if bundle.kind != TreatmentKind::Continuous {
        return Err(Error::NotApplicable("kernel regression requires a continuous treatment".into()));
    }
    check_lag(bundle, p)?;
    let x = &bundle.w[..bundle.len() - p];
    let y = &bundle.y[p..];
    let a = nadaraya_watson(x, y, w, kernel);
    let b = nadaraya_watson(x, y, wprime, kernel);
    for (pt, at) in [(&a, w), (&b, wprime)] {
        if pt.ess.is_nan() || pt.ess < MIN_EFFECTIVE_SAMPLE {
            return Err(Error::Precondition(format!(
                "effective sample near w={at} is {:.3}, below {MIN_EFFECTIVE_SAMPLE}",
                pt.ess
            )));
        }
    }
    let point = a.m - b.m;
    let se = (a.var + b.var).sqrt();
    let diag = BTreeMap::from([
        ("bandwidth".to_string(), json!(kernel.h)),
        ("kernel".to_string(), json!(kernel.kind.name())),
        ("density_source".to_string(), json!("estimated")),
        ("effective_sample_w".to_string(), json!(a.ess)),
        ("effective_sample_wprime".to_string(), json!(b.ess)),
        ("density_w".to_string(), json!(a.f)),
        ("density_wprime".to_string(), json!(b.f)),
    ]);
    Ok(EstimateReport::new("kernel_irf", p, point, se, diag))
}
