//! Local projections and their instrumented ratio form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{check_lag, EstimateReport};
use crate::bundle::PathBundle;
use crate::error::{Error, Result};
use crate::scenario::ScenarioSpec;
use crate::stats::{mean, newey_west_sum, pairwise_sum};

/// Series used as the lagged regressor in [`lp_ols`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regressor {
    Treatment,
    /// The raw instrument column.
    Instrument,
    /// `(What - alpha0) / alpha1`: the instrument on the treatment's scale.
    ScaledInstrument { alpha0: f64, alpha1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub demean: bool,
    pub regressor: Regressor,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { demean: false, regressor: Regressor::Treatment }
    }
}

fn instrument(bundle: &PathBundle) -> Result<&[f64]> {
    bundle
        .what
        .as_deref()
        .ok_or_else(|| Error::NotApplicable("missing instrument: the bundle has no What column".into()))
}

/// `sum Y_t X_{t-p} / sum X_{t-p}^2`, Newey-West standard error truncated at lag `p`.
pub fn lp_ols(bundle: &PathBundle, p: usize, opts: LpOptions) -> Result<EstimateReport> {
    let n = check_lag(bundle, p)?;
    let mut x: Vec<f64> = match opts.regressor {
        Regressor::Treatment => bundle.w[..n].to_vec(),
        Regressor::Instrument => instrument(bundle)?[..n].to_vec(),
        Regressor::ScaledInstrument { alpha0, alpha1 } => {
            if alpha1 == 0.0 {
                return Err(Error::Precondition("instrument scale alpha1 must be nonzero".into()));
            }
            instrument(bundle)?[..n].iter().map(|v| (v - alpha0) / alpha1).collect()
        }
    };
    let mut y = bundle.y[p..].to_vec();
    if opts.demean {
        let (mx, my) = (mean(&x), mean(&y));
        x.iter_mut().for_each(|v| *v -= mx);
        y.iter_mut().for_each(|v| *v -= my);
    }
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let xx: Vec<f64> = x.iter().map(|a| a * a).collect();
    let den = pairwise_sum(&xx);
    if den == 0.0 {
        return Err(Error::Numerical("zero denominator: the lagged regressor is identically zero".into()));
    }
    let beta = pairwise_sum(&xy) / den;
    let scores: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * (b - beta * a)).collect();
    let se = newey_west_sum(&scores, p).sqrt() / den;
    let diag = BTreeMap::from([
        ("effective_sample".to_string(), json!(n)),
        ("denominator".to_string(), json!(den)),
        ("nw_lag".to_string(), json!(p)),
        ("demean".to_string(), json!(opts.demean)),
        ("regressor".to_string(), json!(opts.regressor)),
    ]);
    Ok(EstimateReport::new("lp_ols", p, beta, se, diag))
}

/// Relative size below which the LP-IV denominator is treated as weak.
pub const WEAK_DENOMINATOR_RELATIVE: f64 = 1e-6;

/// `sum Y_t What_{t-p} / sum Y_{t-p} What_{t-p}`, delta-method standard error
/// with Newey-West truncation at lag `p`.
pub fn lp_iv(bundle: &PathBundle, p: usize) -> Result<EstimateReport> {
    let z = instrument(bundle)?;
    let n = check_lag(bundle, p)?;
    let a: Vec<f64> = (0..n).map(|s| bundle.y[s + p] * z[s]).collect();
    let d: Vec<f64> = (0..n).map(|s| bundle.y[s] * z[s]).collect();
    let num = pairwise_sum(&a);
    let den = pairwise_sum(&d);
    let scale = pairwise_sum(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let relative = if scale > 0.0 { den.abs() / scale } else { 0.0 };
    if relative.is_nan() || relative < WEAK_DENOMINATOR_RELATIVE {
        return Err(Error::WeakDenominator { denominator: den, relative });
    }
    let beta = num / den;
    let scores: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x - beta * y).collect();
    let se = newey_west_sum(&scores, p).sqrt() / den.abs();
    let dbar = den / n as f64;
    let centred: Vec<f64> = d.iter().map(|v| v - dbar).collect();
    let z_stat = den / newey_west_sum(&centred, p).sqrt();
    let diag = BTreeMap::from([
        ("effective_sample".to_string(), json!(n)),
        ("denominator".to_string(), json!(den)),
        ("denominator_relative".to_string(), json!(relative)),
        ("denominator_z".to_string(), json!(z_stat)),
        ("nw_lag".to_string(), json!(p)),
    ]);
    Ok(EstimateReport::new("lp_iv", p, beta, se, diag))
}

/// Closed-form limit of the LP-IV ratio under a shocked linear scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlimOracle {
    /// `(beta_gamma_p + beta_prime_p) / beta_gamma_0`.
    pub target: f64,
    pub beta_gamma_p: f64,
    pub beta_gamma_0: f64,
    pub beta_prime_p: f64,
    pub beta_prime_0: f64,
    /// `(beta_gamma_p + beta_prime_p) / (beta_gamma_0 + beta_prime_0)`: the
    /// ratio of the full numerator and denominator moments.
    pub full_moment_ratio: f64,
    pub mixed_sign_weights: bool,
    pub warning: Option<String>,
}

/// Treatment-channel moments `beta_gamma_p = avg_t beta_{t,p} alpha1(t-p) sigma_eta^2(t-p)`
/// and contamination moments `beta'_p = lambda Cov(U_t, e_{t-p}) + alpha0 E[U]`,
/// averaged over the periods the sample ratio uses.
pub fn lp_iv_plim_oracle(spec: &ScenarioSpec, p: usize) -> Result<PlimOracle> {
    let inst = spec
        .instrument
        .as_ref()
        .ok_or_else(|| Error::NotApplicable("missing instrument: the scenario has no instrument block".into()))?;
    if !spec.treatment.is_shock() {
        return Err(Error::NotApplicable("the closed-form limit assumes shocked treatments".into()));
    }
    let horizon = spec.horizon;
    if p >= horizon {
        return Err(Error::Precondition(format!("need p < T, got p={p}, T={horizon}")));
    }
    let n = horizon - p;
    let weight = |s: usize| inst.alpha1_at(s) * spec.treatment.sigma_eta_at(s).powi(2);
    let bg = |lag: usize| -> f64 {
        let v: Vec<f64> = (1..=n).map(|s| spec.outcome_law.beta(s + lag, lag) * weight(s)).collect();
        pairwise_sum(&v) / n as f64
    };
    let u = spec.outcome_law.u_process();
    let u_mean = spec.outcome_law.u_mean();
    let bprime = |lag: usize| inst.lambda * u.innovation_cross_moment(lag) + inst.alpha0 * u_mean;
    let (bgp, bg0) = (bg(p), bg(0));
    if bg0 == 0.0 {
        return Err(Error::Numerical("treatment-channel moment at lag 0 is zero".into()));
    }
    let (bpp, bp0) = (bprime(p), bprime(0));
    let ws: Vec<f64> = (1..=n).map(weight).collect();
    let mixed = ws.iter().any(|v| *v > 0.0) && ws.iter().any(|v| *v < 0.0);
    let warning = mixed.then(|| {
        "treatment-instrument covariances change sign across periods; the ratio need not be a convex \
         combination of effects (monotonicity fails)"
            .to_string()
    });
    Ok(PlimOracle {
        target: (bgp + bpp) / bg0,
        beta_gamma_p: bgp,
        beta_gamma_0: bg0,
        beta_prime_p: bpp,
        beta_prime_0: bp0,
        full_moment_ratio: (bgp + bpp) / (bg0 + bp0),
        mixed_sign_weights: mixed,
        warning,
    })
}
