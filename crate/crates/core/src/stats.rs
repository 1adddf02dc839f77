//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Pairwise summation with a fixed split order, so results do not depend on
/// how inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Variance with divisor `n`.
pub fn variance_pop(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / xs.len() as f64
}

/// Variance with divisor `n - 1`.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    variance_pop(xs) * n / (n - 1.0)
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    INV_SQRT_2PI / sd * (-0.5 * z * z).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Bartlett-weighted long-run variance of a score series, truncated at `lag`:
/// `sum s_t^2 + 2 sum_{k=1}^{lag} (1 - k/(lag+1)) sum_t s_t s_{t-k}`.
/// Returned on the sum scale (not divided by `n`).
pub fn newey_west_sum(scores: &[f64], lag: usize) -> f64 {
    let gamma = |k: usize| -> f64 {
        let prods: Vec<f64> = scores[k..].iter().zip(scores).map(|(a, b)| a * b).collect();
        pairwise_sum(&prods)
    };
    let mut total = gamma(0);
    for k in 1..=lag.min(scores.len().saturating_sub(1)) {
        let w = 1.0 - k as f64 / (lag as f64 + 1.0);
        total += 2.0 * w * gamma(k);
    }
    total.max(0.0)
}

/// Ordinary least squares with heteroskedasticity-robust (HC0) standard errors.
/// `columns` holds regressors column-wise; no intercept is added.
pub fn ols_hc0(y: &[f64], columns: &[Vec<f64>]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let k = columns.len();
    let x = DMatrix::from_fn(n, k, |i, j| columns[j][i]);
    let yv = DVector::from_column_slice(y);
    let xtx_inv = (x.transpose() * &x).try_inverse()?;
    let beta = &xtx_inv * x.transpose() * &yv;
    let resid = &yv - &x * &beta;
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let row = x.row(i);
        meat += row.transpose() * row * (resid[i] * resid[i]);
    }
    let cov = &xtx_inv * meat * &xtx_inv;
    let se = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    Some((beta.iter().copied().collect(), se))
}

/// Kolmogorov-Smirnov distance between the empirical law of `xs` and N(0,1).
pub fn ks_distance_std_normal(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std_normal_cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}
