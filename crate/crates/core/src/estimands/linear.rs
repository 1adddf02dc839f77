//! Closed forms for the bivariate linear-Gaussian autoregression in `(Y_t, W_t)`.

use nalgebra::{Matrix2, Vector2};

use super::{EstimandLabel, EstimandValue};
use crate::error::{Error, Result};
use crate::scenario::{LinearGaussianParams, ScenarioSpec};

fn companion(p: &LinearGaussianParams) -> Matrix2<f64> {
    Matrix2::new(p.phi + p.beta0 * p.delta, p.beta0 * p.theta, p.delta, p.theta)
}

/// Largest eigenvalue modulus of the companion matrix.
pub fn spectral_radius(p: &LinearGaussianParams) -> f64 {
    let a = companion(p);
    let tr = a.trace();
    let det = a.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
    } else {
        det.sqrt()
    }
}

/// `(w - w') e1' A^p (beta0, 1)'`.
pub fn crf_linear_gaussian(params: &LinearGaussianParams, p: usize, w: f64, wprime: f64) -> Result<EstimandValue> {
    if params.rho != 0.0 {
        return Err(Error::NotApplicable("closed-form response requires rho = 0".into()));
    }
    let r = spectral_radius(params);
    if r >= 1.0 {
        return Err(Error::Explosive { spectral_radius: r });
    }
    let v = companion(params).pow(p as u32) * Vector2::new(params.beta0, 1.0);
    Ok(EstimandValue::analytic(EstimandLabel::Crf, None, p, w, wprime, (w - wprime) * v[0]))
}

/// [`crf_linear_gaussian`] on a scenario, rejecting specs outside the family.
pub fn crf_analytic(spec: &ScenarioSpec, p: usize, w: f64, wprime: f64) -> Result<EstimandValue> {
    let params = spec.linear_gaussian_params().ok_or_else(|| {
        Error::NotApplicable("analytic response needs a linear-ar outcome with a shock or policy-rule mechanism".into())
    })?;
    crf_linear_gaussian(&params, p, w, wprime)
}

/// Stationary `Cov(Y_t, W_{t-p}) / Var(W) * (w - w')`: what a regression of
/// `Y_t` on `W_{t-p}` alone converges to. Equals the impulse response only for
/// shocked treatments.
pub fn regression_irf_linear_gaussian(params: &LinearGaussianParams, p: usize, w: f64, wprime: f64) -> Result<EstimandValue> {
    let r = spectral_radius(params);
    if r >= 1.0 {
        return Err(Error::Explosive { spectral_radius: r });
    }
    let a = companion(params);
    let (se, sh, b0) = (params.sigma_eps, params.sigma_eta, params.beta0);
    let c = params.rho * se * sh;
    let q = Matrix2::new(se * se + b0 * b0 * sh * sh + 2.0 * b0 * c, b0 * sh * sh + c, b0 * sh * sh + c, sh * sh);
    // Gamma = sum_k A^k Q A'^k, by doubling.
    let mut gamma = q;
    let mut ak = a;
    for _ in 0..64 {
        let next = gamma + ak * gamma * ak.transpose();
        ak *= ak;
        if (next - gamma).abs().max() < 1e-16 * next.abs().max() {
            gamma = next;
            break;
        }
        gamma = next;
    }
    let cov = a.pow(p as u32) * gamma;
    Ok(EstimandValue::analytic(EstimandLabel::RegressionIrf, None, p, w, wprime, (w - wprime) * cov[(0, 1)] / gamma[(1, 1)]))
}
