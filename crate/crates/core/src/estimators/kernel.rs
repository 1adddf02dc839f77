use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::INV_SQRT_2PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
    Epanechnikov,
}

impl KernelKind {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelKind::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            KernelKind::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// Second moment `kappa_2`.
    pub fn kappa2(self) -> f64 {
        match self {
            KernelKind::Gaussian => 1.0,
            KernelKind::Epanechnikov => 0.2,
        }
    }

    /// Roughness `b = int k^2`.
    pub fn roughness(self) -> f64 {
        match self {
            KernelKind::Gaussian => 1.0 / (2.0 * PI.sqrt()),
            KernelKind::Epanechnikov => 0.6,
        }
    }

    fn support(self) -> f64 {
        match self {
            KernelKind::Gaussian => 12.0,
            KernelKind::Epanechnikov => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Epanechnikov => "epanechnikov",
        }
    }
}

/// Composite Simpson rule of `u^j k(u)^q` over the kernel's support.
pub fn kernel_moment(kind: KernelKind, j: i32, q: i32) -> f64 {
    let n = 20_000;
    let a = kind.support();
    let step = 2.0 * a / n as f64;
    let f = |u: f64| u.powi(j) * kind.eval(u).powi(q);
    let mut s = f(-a) + f(a);
    for i in 1..n {
        let u = -a + i as f64 * step;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
    }
    s * step / 3.0
}

/// A kernel with its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub h: f64,
}

impl KernelSpec {
    /// Checks `h > 0` and, by quadrature, that the kernel integrates to one
    /// and is centred.
    pub fn new(kind: KernelKind, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Precondition(format!("bandwidth must be positive, got {h}")));
        }
        let k0 = kernel_moment(kind, 0, 1);
        let k1 = kernel_moment(kind, 1, 1);
        if (k0 - 1.0).abs() > 1e-8 || k1.abs() > 1e-8 {
            return Err(Error::Numerical(format!("{} kernel fails moment checks: k0={k0}, k1={k1}", kind.name())));
        }
        Ok(KernelSpec { kind, h })
    }

    pub fn kappa2(&self) -> f64 {
        self.kind.kappa2()
    }

    pub fn roughness(&self) -> f64 {
        self.kind.roughness()
    }

    /// `k_h(x) = k(x / h) / h`.
    #[inline]
    pub fn kh(&self, x: f64) -> f64 {
        self.kind.eval(x / self.h) / self.h
    }
}

/// `h = c (T - p)^(-1/5)`.
pub fn bandwidth_rule(t: usize, p: usize, c: f64) -> Result<f64> {
    if t <= p {
        return Err(Error::Precondition(format!("need T > p, got T={t}, p={p}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Precondition(format!("bandwidth constant must be positive, got {c}")));
    }
    Ok(c * ((t - p) as f64).powf(-0.2))
}

/// Rule-of-thumb constant `1.06 sd(W)`.
pub fn default_bandwidth_constant(w: &[f64]) -> f64 {
    1.06 * crate::stats::variance(w).sqrt()
}
