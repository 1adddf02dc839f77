//! Simulation diagnostics for the structural assumptions a scenario claims.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{draw_noise, replay_outcome, simulate};
use crate::scenario::ScenarioSpec;
use crate::seed::{derive_streams, SeedStream, StreamLabel};
use crate::stats::ols_hc0;

/// Outcome of one diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotsCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Headline statistic: violation count for exact checks, max |z| for regressions.
    pub statistic: f64,
    /// Estimated coefficients, where the check is a regression.
    pub coefficients: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotsReport {
    pub checks: Vec<PotsCheck>,
}

impl PotsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PotsCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const REPLAY_HORIZON: usize = 200;

/// Runs the non-anticipation, shock, exclusion and innovation-independence
/// checks. `m` is the number of perturbation trials for the exact checks and
/// the number of periods for the regression checks.
pub fn validate_pots(spec: &ScenarioSpec, m: usize, seed: u64) -> PotsReport {
    let m = m.max(2);
    PotsReport {
        checks: vec![
            non_anticipation(spec, m, seed),
            shock(spec, m, seed),
            exclusion(spec, m, seed),
            innovation_independence(spec, m, seed),
        ],
    }
}

fn trial_spec(spec: &ScenarioSpec) -> ScenarioSpec {
    spec.with_horizon(spec.horizon.min(REPLAY_HORIZON))
}

fn perturbation_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    SeedStream::new(seed, u64::MAX, StreamLabel::Counterfactual).substream(tag).rng()
}

fn non_anticipation(spec: &ScenarioSpec, m: usize, seed: u64) -> PotsCheck {
    let sp = trial_spec(spec);
    let n = sp.horizon;
    let mut rng = perturbation_rng(seed, 1);
    let mut violations = 0usize;
    for rep in 0..m {
        let panel = draw_noise(&sp, &derive_streams(seed, rep as u64));
        let base = simulate(&sp, &panel);
        let cut = rng.random_range(1..n);
        let mut w = base.w.clone();
        for x in &mut w[cut..] {
            *x = perturbed_value(&sp, &mut rng);
        }
        let y = replay_outcome(&sp, &panel, &w).expect("replay on valid path");
        if y[..cut] != base.y[..cut] {
            violations += 1;
        }
    }
    PotsCheck {
        name: "non-anticipation",
        passed: violations == 0,
        statistic: violations as f64,
        coefficients: Vec::new(),
        detail: format!("{violations} of {m} future-treatment perturbations changed an outcome prefix"),
    }
}

fn perturbed_value(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> f64 {
    if spec.treatment.is_discrete() {
        f64::from(rng.random::<bool>() as u8)
    } else {
        3.0 * rng.sample::<f64, _>(StandardNormal)
    }
}

fn shock(spec: &ScenarioSpec, m: usize, seed: u64) -> PotsCheck {
    let sp = spec.with_horizon(m + 1);
    let b = simulate(&sp, &draw_noise(&sp, &derive_streams(seed, 0)));
    let y: Vec<f64> = b.w[1..].to_vec();
    let cols = vec![vec![1.0; m], b.y[..m].to_vec(), b.w[..m].to_vec()];
    regression_check("shock", &y, &cols, 1, |c| {
        format!("W_t on (1, Y_t-1, W_t-1): delta-coefficient {:.4}, theta-coefficient {:.4}", c[1], c[2])
    })
}

fn innovation_independence(spec: &ScenarioSpec, m: usize, seed: u64) -> PotsCheck {
    let sp = spec.with_horizon(m);
    let panel = draw_noise(&sp, &derive_streams(seed, 1));
    let cols = vec![vec![1.0; m], panel.eps.clone()];
    regression_check("innovation-independence", &panel.eta, &cols, 1, |c| {
        format!("treatment innovation on outcome innovation: slope {:.4}", c[1])
    })
}

/// Passes when every coefficient from index `first` on is within 3 SE of 0.
fn regression_check(
    name: &'static str,
    y: &[f64],
    cols: &[Vec<f64>],
    first: usize,
    describe: impl Fn(&[f64]) -> String,
) -> PotsCheck {
    match ols_hc0(y, cols) {
        Some((beta, se)) => {
            let zmax = beta[first..]
                .iter()
                .zip(&se[first..])
                .map(|(b, s)| if *s > 0.0 { (b / s).abs() } else if *b == 0.0 { 0.0 } else { f64::INFINITY })
                .fold(0.0, f64::max);
            PotsCheck { name, passed: zmax <= 3.0, statistic: zmax, detail: describe(&beta), coefficients: beta }
        }
        None => PotsCheck {
            name,
            passed: false,
            statistic: f64::NAN,
            coefficients: Vec::new(),
            detail: "regression design is singular".into(),
        },
    }
}

fn exclusion(spec: &ScenarioSpec, m: usize, seed: u64) -> PotsCheck {
    let Some(inst) = &spec.instrument else {
        return PotsCheck {
            name: "exclusion",
            passed: true,
            statistic: 0.0,
            coefficients: Vec::new(),
            detail: "no instrument block; nothing to check".into(),
        };
    };
    let sp = trial_spec(spec);
    let mut rng = perturbation_rng(seed, 2);
    let (mut y_changed, mut what_unchanged) = (0usize, 0usize);
    for rep in 0..m {
        let mut panel = draw_noise(&sp, &derive_streams(seed, rep as u64));
        let base = simulate(&sp, &panel);
        for z in &mut panel.zeta {
            *z += rng.sample::<f64, _>(StandardNormal);
        }
        let pert = simulate(&sp, &panel);
        if pert.y != base.y || pert.w != base.w {
            y_changed += 1;
        }
        if inst.sigma_zeta != 0.0 && pert.what == base.what {
            what_unchanged += 1;
        }
    }
    PotsCheck {
        name: "exclusion",
        passed: y_changed == 0 && what_unchanged == 0,
        statistic: y_changed as f64,
        coefficients: Vec::new(),
        detail: format!(
            "{y_changed} of {m} instrument-noise perturbations changed outcomes; {what_unchanged} left the instrument unchanged"
        ),
    }
}
