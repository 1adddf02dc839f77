//! Brute-force oracle for binary mechanisms on short horizons: every one of
//! the `2^T` treatment paths, its exact probability, and its potential
//! outcomes against one fixed panel.

use super::{EstimandLabel, EstimandValue};
use crate::bundle::{PathBundle, TreatmentKind};
use crate::dgp::{propensity, replay_outcome, NoisePanel};
use crate::error::{Error, Result};
use crate::scenario::ScenarioSpec;
use crate::stats::pairwise_sum;

pub const MAX_ENUMERATION_HORIZON: usize = 12;

const OVERLAP_FLOOR: f64 = 1e-6;

/// Paths are bit masks: bit `k` holds `W_{k+1}`.
#[derive(Debug, Clone)]
pub struct ExactEnumeration {
    horizon: usize,
    prob: Vec<f64>,
    /// `y[mask * T + t - 1]`.
    y: Vec<f64>,
    /// Probability of the realized treatment, same layout as `y`.
    prop: Vec<f64>,
}

/// Per-period expected conditional variance of the HT term and its average.
#[derive(Debug, Clone, PartialEq)]
pub struct HtVarianceOracle {
    /// `E[eta^2_{t-p}]` for `t = p+1..=T`.
    pub eta_sq: Vec<f64>,
    pub eta_bar: f64,
}

fn bit(w: f64) -> Result<usize> {
    if w == 0.0 {
        Ok(0)
    } else if w == 1.0 {
        Ok(1)
    } else {
        Err(Error::Precondition(format!("treatment value {w} is outside the binary support {{0, 1}}")))
    }
}

impl ExactEnumeration {
    pub fn new(spec: &ScenarioSpec, panel: &NoisePanel) -> Result<Self> {
        if !spec.treatment.is_discrete() {
            return Err(Error::NotApplicable("exact requires discrete mechanism".into()));
        }
        let n = panel.len();
        if n > MAX_ENUMERATION_HORIZON {
            return Err(Error::Precondition(format!(
                "exact enumeration is limited to T <= {MAX_ENUMERATION_HORIZON}, got {n}"
            )));
        }
        let count = 1usize << n;
        let mut prob = Vec::with_capacity(count);
        let mut y = Vec::with_capacity(count * n);
        let mut prop = Vec::with_capacity(count * n);
        let mut w = vec![0.0; n];
        for mask in 0..count {
            for (k, x) in w.iter_mut().enumerate() {
                *x = f64::from(((mask >> k) & 1) as u8);
            }
            let ys = replay_outcome(spec, panel, &w)?;
            let mut pr = 1.0;
            for s in 1..=n {
                let p = propensity(spec, &w[..s - 1], &ys[..s - 1], w[s - 1]);
                if p < OVERLAP_FLOOR || 1.0 - p < OVERLAP_FLOOR {
                    return Err(Error::Precondition(format!(
                        "overlap fails at t={s}: treatment probability {p} leaves a value with probability below {OVERLAP_FLOOR:e}"
                    )));
                }
                pr *= p;
                prop.push(p);
            }
            prob.push(pr);
            y.extend_from_slice(&ys);
        }
        Ok(ExactEnumeration { horizon: n, prob, y, prop })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn path_count(&self) -> usize {
        self.prob.len()
    }

    /// Treatments, outcomes and propensities of one path as a bundle.
    pub fn bundle(&self, mask: usize) -> PathBundle {
        let n = self.horizon;
        PathBundle {
            w: (0..n).map(|k| f64::from(((mask >> k) & 1) as u8)).collect(),
            y: self.y[mask * n..(mask + 1) * n].to_vec(),
            what: None,
            propensity: self.prop[mask * n..(mask + 1) * n].to_vec(),
            kind: TreatmentKind::Discrete,
        }
    }

    pub fn probability(&self, mask: usize) -> f64 {
        self.prob[mask]
    }

    /// Exact mean and variance over paths of any statistic of the realized bundle.
    pub fn sampling_moments<F: Fn(&PathBundle) -> Result<f64>>(&self, stat: F) -> Result<(f64, f64)> {
        let vals: Vec<f64> = (0..self.path_count()).map(|m| stat(&self.bundle(m))).collect::<Result<_>>()?;
        let m = self.weighted(|k| vals[k]);
        let v = self.weighted(|k| (vals[k] - m).powi(2));
        Ok((m, v))
    }

    fn weighted(&self, f: impl Fn(usize) -> f64) -> f64 {
        let terms: Vec<f64> = (0..self.path_count()).map(|k| self.prob[k] * f(k)).collect();
        pairwise_sum(&terms)
    }

    /// Sums of `P`, `P Y_t`, `P Y_t^2` grouped by the first `k` treatments.
    fn grouped(&self, t: usize, k: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.horizon;
        let size = 1usize << k;
        let (mut sp, mut sy, mut sy2) = (vec![0.0; size], vec![0.0; size], vec![0.0; size]);
        for mask in 0..self.path_count() {
            let g = mask & (size - 1);
            let (p, y) = (self.prob[mask], self.y[mask * n + t - 1]);
            sp[g] += p;
            sy[g] += p * y;
            sy2[g] += p * y * y;
        }
        (sp, sy, sy2)
    }

    fn check(&self, t: usize, p: usize) -> Result<()> {
        if p >= t || t > self.horizon {
            return Err(Error::Precondition(format!("need p < t <= T, got p={p}, t={t}, T={}", self.horizon)));
        }
        Ok(())
    }

    /// Weighted causal effect at `t` for every history `W_{1:t-p-1}` (indexed
    /// by its bit mask), together with each history's probability.
    pub fn tau_star_by_history(&self, t: usize, p: usize, w: f64, wprime: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(t, p)?;
        let (bw, bwp) = (bit(w)?, bit(wprime)?);
        let k = t - p;
        let (sp, sy, _) = self.grouped(t, k);
        let hist = 1usize << (k - 1);
        let top = 1usize << (k - 1);
        let mut tau = Vec::with_capacity(hist);
        let mut ph = Vec::with_capacity(hist);
        for h in 0..hist {
            let a = h | (bw * top);
            let b = h | (bwp * top);
            tau.push(sy[a] / sp[a] - sy[b] / sp[b]);
            ph.push(sp[h] + sp[h | top]);
        }
        Ok((tau, ph))
    }

    /// Weighted causal effect at `t` along the history of path `mask`.
    pub fn tau_star_at(&self, mask: usize, t: usize, p: usize, w: f64, wprime: f64) -> Result<EstimandValue> {
        let (tau, _) = self.tau_star_by_history(t, p, w, wprime)?;
        let h = mask & ((1usize << (t - p - 1)) - 1);
        Ok(EstimandValue::exact(EstimandLabel::TauStar, Some(t), p, w, wprime, tau[h]))
    }

    /// Path-average weighted effect along path `mask`.
    pub fn avg_tau_star_at(&self, mask: usize, p: usize, w: f64, wprime: f64) -> Result<f64> {
        let tables = self.tables(p, w, wprime)?;
        Ok(Self::avg_along(&tables, mask))
    }

    fn tables(&self, p: usize, w: f64, wprime: f64) -> Result<Vec<Vec<f64>>> {
        (p + 1..=self.horizon).map(|t| self.tau_star_by_history(t, p, w, wprime).map(|r| r.0)).collect()
    }

    fn avg_along(tables: &[Vec<f64>], mask: usize) -> f64 {
        let vals: Vec<f64> =
            tables.iter().enumerate().map(|(i, tab)| tab[mask & ((1usize << i) - 1)]).collect();
        pairwise_sum(&vals) / vals.len() as f64
    }

    /// Expected value over paths of the path-average weighted effect.
    pub fn expected_avg_tau_star(&self, p: usize, w: f64, wprime: f64) -> Result<EstimandValue> {
        self.check(p + 1, p)?;
        let tables = self.tables(p, w, wprime)?;
        let v = self.weighted(|m| Self::avg_along(&tables, m));
        Ok(EstimandValue::exact(EstimandLabel::AvgTauStar, None, p, w, wprime, v))
    }

    /// Exact `E[(S(path) - avg tau*(path))^2]` for a statistic `S`, i.e. the
    /// sampling variance of its error about the path-specific target.
    pub fn error_second_moment<F: Fn(&PathBundle) -> Result<f64>>(&self, p: usize, w: f64, wprime: f64, stat: F) -> Result<f64> {
        let tables = self.tables(p, w, wprime)?;
        let errs: Vec<f64> = (0..self.path_count())
            .map(|m| stat(&self.bundle(m)).map(|s| (s - Self::avg_along(&tables, m)).powi(2)))
            .collect::<Result<_>>()?;
        Ok(self.weighted(|m| errs[m]))
    }

    /// Expected conditional variance of the HT term at each `t`:
    /// `E[Y_t^2 | h, w]/p(w|h) + E[Y_t^2 | h, w']/p(w'|h) - tau*(h)^2`, averaged over `h`.
    pub fn ht_variance_oracle(&self, p: usize, w: f64, wprime: f64) -> Result<HtVarianceOracle> {
        self.check(p + 1, p)?;
        let (bw, bwp) = (bit(w)?, bit(wprime)?);
        let mut eta_sq = Vec::with_capacity(self.horizon - p);
        for t in p + 1..=self.horizon {
            if bw == bwp {
                eta_sq.push(0.0);
                continue;
            }
            let k = t - p;
            let (sp, sy, sy2) = self.grouped(t, k);
            let top = 1usize << (k - 1);
            let mut terms = Vec::with_capacity(top);
            for h in 0..top {
                let (a, b) = (h | (bw * top), h | (bwp * top));
                let phist = sp[h] + sp[h | top];
                let (pa, pb) = (sp[a] / phist, sp[b] / phist);
                let tau = sy[a] / sp[a] - sy[b] / sp[b];
                let eta = (sy2[a] / sp[a]) / pa + (sy2[b] / sp[b]) / pb - tau * tau;
                terms.push(phist * eta);
            }
            eta_sq.push(pairwise_sum(&terms));
        }
        let eta_bar = pairwise_sum(&eta_sq) / eta_sq.len() as f64;
        Ok(HtVarianceOracle { eta_sq, eta_bar })
    }
}
