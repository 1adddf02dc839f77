//! Data-generating processes: primitive noise, factual simulation and
//! counterfactual replay.
//!
//! Everything random lives in a [`NoisePanel`]. Once a panel is drawn, the
//! potential outcome `Y_t(w_{1:t})` for any treatment path is a deterministic
//! function of the panel and the path, which is what makes causal ground
//! truth computable: swap the treatment path, keep the panel, replay.

mod validate;

pub use validate::{validate_pots, PotsCheck, PotsReport};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bundle::{PathBundle, TreatmentKind};
use crate::error::{Error, Result};
use crate::scenario::{OutcomeLaw, ScenarioSpec, TreatmentMechanism, UProcess};
use crate::seed::{SeedStream, StreamSet};
use crate::stats::{logistic, normal_pdf};

/// All primitive randomness for one world-draw. Index `i` is period `t = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePanel {
    /// Standardized outcome innovations.
    pub eps: Vec<f64>,
    /// Standardized treatment innovations, correlated with `eps` at `rho`.
    pub eta: Vec<f64>,
    /// Standardized instrument noise (empty without an instrument block).
    pub zeta: Vec<f64>,
    /// Uniforms for discrete assignment.
    pub uniform: Vec<f64>,
    /// Initial state of the `U` process.
    pub u0: f64,
    pub y0: f64,
    pub w0: f64,
    /// Realized `U_t`, derived from `eps` and `u0`.
    pub u_path: Vec<f64>,
    /// Innovation entering `U_t` on its natural scale.
    pub u_innov: Vec<f64>,
}

impl NoisePanel {
    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Rebuilds the derived `U` path after the primitive channels were edited.
    pub fn refresh_u(&mut self, spec: &ScenarioSpec) {
        let (u, e) = realize_u(spec, self.u0, self.y0, &self.eps);
        self.u_path = u;
        self.u_innov = e;
    }
}

/// State of the treatment-free outcome component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct UState {
    pub value: f64,
    pub last_innov: f64,
}

fn u_initial(u: &UProcess, u0: f64) -> UState {
    match *u {
        UProcess::Arch1 { omega, alpha } => UState { value: 0.0, last_innov: (omega / (1.0 - alpha)).sqrt() },
        _ => UState { value: u0, last_innov: 0.0 },
    }
}

fn u_step(u: &UProcess, prev: UState, z: f64) -> UState {
    match *u {
        UProcess::Zero => UState { value: 0.0, last_innov: 0.0 },
        UProcess::IidNormal { sigma } => UState { value: sigma * z, last_innov: sigma * z },
        UProcess::Ar1 { phi, sigma } => UState { value: phi * prev.value + sigma * z, last_innov: sigma * z },
        UProcess::RandomWalk { sigma } => UState { value: prev.value + sigma * z, last_innov: sigma * z },
        UProcess::Arch1 { omega, alpha } => {
            let e = (omega + alpha * prev.last_innov * prev.last_innov).sqrt() * z;
            UState { value: e, last_innov: e }
        }
    }
}

/// `U` path and natural-scale innovations. For `linear-ar`, `U_t` is the
/// treatment-free outcome `mu + phi U_{t-1} + sigma_eps eps_t` started at `Y_0`.
fn realize_u(spec: &ScenarioSpec, u0: f64, y0: f64, eps: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut path = Vec::with_capacity(eps.len());
    let mut innov = Vec::with_capacity(eps.len());
    match &spec.outcome_law {
        OutcomeLaw::LinearAr(c) => {
            let mut prev = y0;
            for z in eps {
                let e = c.sigma_eps * z;
                prev = c.mu + c.phi * prev + e;
                path.push(prev);
                innov.push(e);
            }
        }
        law => {
            let up = law.u_process();
            let mut st = u_initial(&up, u0);
            for z in eps {
                st = u_step(&up, st, *z);
                path.push(st.value);
                innov.push(st.last_innov);
            }
        }
    }
    (path, innov)
}

fn normals(stream: SeedStream, n: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws a panel of length `spec.horizon`.
pub fn draw_noise(spec: &ScenarioSpec, streams: &StreamSet) -> NoisePanel {
    draw_noise_len(spec, streams, spec.horizon)
}

/// Draws a panel of arbitrary length. Draws are prefix-consistent: a shorter
/// panel from the same streams is a prefix of a longer one.
pub fn draw_noise_len(spec: &ScenarioSpec, streams: &StreamSet, len: usize) -> NoisePanel {
    let eps = normals(streams.eps, len);
    let raw_eta = normals(streams.eta, len);
    let c = (1.0 - spec.rho * spec.rho).sqrt();
    let eta = eps.iter().zip(&raw_eta).map(|(e, h)| spec.rho * e + c * h).collect();
    let zeta = if spec.instrument.is_some() { normals(streams.zeta, len) } else { Vec::new() };
    let uniform = {
        let mut rng = streams.uniform.rng();
        (0..len).map(|_| rng.random::<f64>()).collect()
    };
    let u0 = match spec.outcome_law.u_process() {
        UProcess::Ar1 { phi, sigma } if phi.abs() < 1.0 && !matches!(spec.outcome_law, OutcomeLaw::LinearAr(_)) => {
            let z: f64 = streams.u.rng().sample(StandardNormal);
            z * sigma / (1.0 - phi * phi).sqrt()
        }
        _ => 0.0,
    };
    let mut panel = NoisePanel {
        eps,
        eta,
        zeta,
        uniform,
        u0,
        y0: 0.0,
        w0: 0.0,
        u_path: Vec::new(),
        u_innov: Vec::new(),
    };
    panel.refresh_u(spec);
    panel
}

/// Outcome at period `t` given the treatment history `w_hist = w_{1:t}`.
/// `z` is the standardized outcome innovation (used by `linear-ar`), `u` the
/// realized `U_t` (used by the other laws).
#[inline]
pub(crate) fn outcome_at(spec: &ScenarioSpec, t: usize, w_hist: &[f64], y_prev: f64, z: f64, u: f64) -> f64 {
    match &spec.outcome_law {
        OutcomeLaw::LinearAr(c) => c.mu + c.phi * y_prev + c.beta0 * w_hist[t - 1] + c.sigma_eps * z,
        OutcomeLaw::BinaryDemo(c) => {
            let lag = if t >= 2 { w_hist[t - 2] } else { 0.0 };
            u + c.beta0 * w_hist[t - 1] + c.beta1 * lag
        }
        law @ OutcomeLaw::LinearGeneral(g) => {
            let mut y = u;
            for s in 0..=g.lag_cutoff.min(t - 1) {
                y += law.beta(t, s) * w_hist[t - 1 - s];
            }
            y
        }
    }
}

/// Treatment at period `t` and the probability (discrete) or density
/// (continuous) of the realized value.
#[inline]
pub(crate) fn treatment_at(spec: &ScenarioSpec, t: usize, w_prev: f64, y_prev: f64, eta: f64, uniform: f64) -> (f64, f64) {
    match spec.treatment {
        TreatmentMechanism::ShockNormal { .. } => {
            let sd = spec.treatment.sigma_eta_at(t);
            let w = sd * eta;
            (w, normal_pdf(w, 0.0, sd))
        }
        TreatmentMechanism::PolicyRule { gamma, theta, delta, sigma_eta } => {
            let m = gamma + theta * w_prev + delta * y_prev;
            let w = m + sigma_eta * eta;
            (w, normal_pdf(w, m, sigma_eta))
        }
        TreatmentMechanism::BernoulliIid { pi } => {
            if uniform < pi {
                (1.0, pi)
            } else {
                (0.0, 1.0 - pi)
            }
        }
        TreatmentMechanism::BernoulliLogistic { a, b, c } => {
            let p1 = logistic(a + b * y_prev + c * w_prev);
            if uniform < p1 {
                (1.0, p1)
            } else {
                (0.0, 1.0 - p1)
            }
        }
    }
}

/// Probability `p_t(w)` (discrete) or density `f_t(w)` (continuous) of
/// treatment `w` at `t = w_hist.len() + 1`, given the realized history.
pub fn propensity(spec: &ScenarioSpec, w_hist: &[f64], y_hist: &[f64], w: f64) -> f64 {
    let t = w_hist.len() + 1;
    let w_prev = w_hist.last().copied().unwrap_or(0.0);
    let y_prev = y_hist.last().copied().unwrap_or(0.0);
    match spec.treatment {
        TreatmentMechanism::ShockNormal { .. } => normal_pdf(w, 0.0, spec.treatment.sigma_eta_at(t)),
        TreatmentMechanism::PolicyRule { gamma, theta, delta, sigma_eta } => {
            normal_pdf(w, gamma + theta * w_prev + delta * y_prev, sigma_eta)
        }
        TreatmentMechanism::BernoulliIid { pi } => binary_prob(pi, w),
        TreatmentMechanism::BernoulliLogistic { a, b, c } => binary_prob(logistic(a + b * y_prev + c * w_prev), w),
    }
}

fn binary_prob(p1: f64, w: f64) -> f64 {
    if w == 1.0 {
        p1
    } else if w == 0.0 {
        1.0 - p1
    } else {
        0.0
    }
}

/// Checks that `w` lies in the mechanism's support.
pub(crate) fn check_support(spec: &ScenarioSpec, w: f64) -> Result<()> {
    if !w.is_finite() {
        return Err(Error::Precondition(format!("treatment value {w} is not finite")));
    }
    if spec.treatment.is_discrete() && w != 0.0 && w != 1.0 {
        return Err(Error::Precondition(format!("treatment value {w} is outside the binary support {{0, 1}}")));
    }
    Ok(())
}

/// Potential outcomes `Y_{1:t}(w_{1:t})` for the given treatment path against a fixed panel.
pub fn replay_outcome(spec: &ScenarioSpec, panel: &NoisePanel, w_path: &[f64]) -> Result<Vec<f64>> {
    if w_path.len() > panel.len() {
        return Err(Error::Precondition(format!(
            "treatment path has length {} but the panel covers {} periods",
            w_path.len(),
            panel.len()
        )));
    }
    if let Some(bad) = w_path.iter().find(|w| !w.is_finite()) {
        return Err(Error::Precondition(format!("treatment value {bad} is not finite")));
    }
    let mut y = Vec::with_capacity(w_path.len());
    let mut y_prev = panel.y0;
    for t in 1..=w_path.len() {
        y_prev = outcome_at(spec, t, w_path, y_prev, panel.eps[t - 1], panel.u_path[t - 1]);
        y.push(y_prev);
    }
    Ok(y)
}

/// Factual path: treatments drawn from the mechanism given the realized
/// history, outcomes by replay, instrument and propensities recorded.
pub fn simulate(spec: &ScenarioSpec, panel: &NoisePanel) -> PathBundle {
    let n = panel.len();
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut prop = Vec::with_capacity(n);
    let (mut w_prev, mut y_prev) = (panel.w0, panel.y0);
    for t in 1..=n {
        let (wt, pt) = treatment_at(spec, t, w_prev, y_prev, panel.eta[t - 1], panel.uniform[t - 1]);
        w.push(wt);
        prop.push(pt);
        y_prev = outcome_at(spec, t, &w, y_prev, panel.eps[t - 1], panel.u_path[t - 1]);
        y.push(y_prev);
        w_prev = wt;
    }
    let what = spec.instrument.as_ref().map(|inst| {
        (0..n)
            .map(|i| inst.alpha0 + inst.alpha1_at(i + 1) * w[i] + inst.sigma_zeta * panel.zeta[i] + inst.lambda * panel.u_innov[i])
            .collect()
    });
    let kind = if spec.treatment.is_discrete() { TreatmentKind::Discrete } else { TreatmentKind::Continuous };
    PathBundle { w, y, what, propensity: prop, kind }
}

/// A drawn panel together with its factual path.
#[derive(Debug, Clone)]
pub struct World {
    pub spec: ScenarioSpec,
    pub panel: NoisePanel,
    pub factual: PathBundle,
    pub streams: StreamSet,
}

impl World {
    pub fn new(spec: &ScenarioSpec, streams: StreamSet) -> Self {
        Self::with_len(spec, streams, spec.horizon)
    }

    pub fn with_len(spec: &ScenarioSpec, streams: StreamSet, len: usize) -> Self {
        let spec = spec.with_horizon(len);
        let panel = draw_noise(&spec, &streams);
        let factual = simulate(&spec, &panel);
        World { spec, panel, factual, streams }
    }

    pub fn horizon(&self) -> usize {
        self.panel.len()
    }
}

/// How outcome-side noise is treated past the intervention point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Outcome noise fixed from the panel: potential outcomes are held fixed
    /// and only future treatments are redrawn.
    WeightedEffect,
    /// Outcome noise on `[t0, t]` redrawn alongside future treatments.
    Crf,
}

/// Fresh draws for one forward continuation. Shared by both arms of a
/// contrast so the arms differ only through the intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardDraws {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
    pub uniform: Vec<f64>,
}

impl ForwardDraws {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, len: usize, rho: f64) -> Self {
        let c = (1.0 - rho * rho).sqrt();
        let mut eps = Vec::with_capacity(len);
        let mut eta = Vec::with_capacity(len);
        let mut uniform = Vec::with_capacity(len);
        for _ in 0..len {
            let e: f64 = rng.sample(StandardNormal);
            let h: f64 = rng.sample(StandardNormal);
            eps.push(e);
            eta.push(rho * e + c * h);
            uniform.push(rng.random::<f64>());
        }
        ForwardDraws { eps, eta, uniform }
    }
}

/// Continuation of a world after forcing `W_{t0} = w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPath {
    /// `W_{t0..=t}`.
    pub w: Vec<f64>,
    /// `Y_{t0..=t}`.
    pub y: Vec<f64>,
}

/// Forces `W_{t0} = w`, then draws `W_{t0+1..=t}` forward from the assignment
/// mechanism using `draws`, and computes outcomes by replay.
///
/// Conditioning on `W_{t0} = w` is realized as an intervention followed by
/// forward mechanism draws. Under non-anticipating assignment with `rho = 0`
/// the innovation that pins `W_{t0}` enters nothing else, so the forced value
/// and a conditioned-on value generate the same law for everything after it.
/// `draws` must hold at least `t - t0 + 1` entries.
pub fn intervene_forward(
    world: &World,
    t0: usize,
    w: f64,
    t: usize,
    draws: &ForwardDraws,
    mode: ForwardMode,
) -> Result<ForwardPath> {
    if t0 == 0 || t0 > t || t > world.horizon() {
        return Err(Error::Precondition(format!(
            "need 1 <= t0 <= t <= T, got t0={t0}, t={t}, T={}",
            world.horizon()
        )));
    }
    check_support(&world.spec, w)?;
    if draws.eps.len() < t - t0 + 1 {
        return Err(Error::Precondition("not enough forward draws for the continuation".into()));
    }
    let mut hist = world.factual.w[..t0 - 1].to_vec();
    hist.reserve(t - t0 + 1);
    let mut y = Vec::with_capacity(t - t0 + 1);
    forward_core(world, t0, w, t, draws, mode, &mut hist, &mut y);
    Ok(ForwardPath { w: hist[t0 - 1..].to_vec(), y })
}

/// Allocation-reusing core of [`intervene_forward`]; returns `Y_t`.
/// `hist` must hold `W_{1:t0-1}` on entry.
#[allow(clippy::too_many_arguments)]
pub(crate) fn forward_core(
    world: &World,
    t0: usize,
    w: f64,
    t: usize,
    draws: &ForwardDraws,
    mode: ForwardMode,
    hist: &mut Vec<f64>,
    ys: &mut Vec<f64>,
) -> f64 {
    let spec = &world.spec;
    let panel = &world.panel;
    let mut y_prev = if t0 >= 2 { world.factual.y[t0 - 2] } else { panel.y0 };
    let up = spec.outcome_law.u_process();
    let mut u_state = if t0 >= 2 {
        UState { value: panel.u_path[t0 - 2], last_innov: panel.u_innov[t0 - 2] }
    } else {
        u_initial(&up, panel.u0)
    };
    let mut w_prev = w;
    for s in t0..=t {
        let k = s - t0;
        let ws = if s == t0 {
            w
        } else {
            treatment_at(spec, s, w_prev, y_prev, draws.eta[k], draws.uniform[k]).0
        };
        hist.push(ws);
        let (z, u) = match mode {
            ForwardMode::WeightedEffect => (panel.eps[s - 1], panel.u_path[s - 1]),
            ForwardMode::Crf => {
                u_state = u_step(&up, u_state, draws.eps[k]);
                (draws.eps[k], u_state.value)
            }
        };
        y_prev = outcome_at(spec, s, hist, y_prev, z, u);
        ys.push(y_prev);
        w_prev = ws;
    }
    y_prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_streams;
    use crate::stats::{correlation, mean};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn spec(doc: &str) -> ScenarioSpec {
        ScenarioSpec::parse(doc).unwrap()
    }

    fn s1(t: usize, rho: f64) -> ScenarioSpec {
        spec(&format!(
            r#"{{"horizon": {t}, "outcome_law": "linear-ar", "rho": {rho},
                "coefficients": {{"mu": 0, "phi": 0.5, "beta0": 2, "sigma_eps": 1}},
                "treatment_mechanism": {{"kind": "shock-normal", "sigma_eta": 1}}}}"#
        ))
    }

    fn zero_panel(spec: &ScenarioSpec, n: usize) -> NoisePanel {
        let mut p = draw_noise_len(spec, &derive_streams(0, 0), n);
        p.eps.iter_mut().for_each(|e| *e = 0.0);
        p.u0 = 0.0;
        p.refresh_u(spec);
        p
    }

    #[test]
    fn linear_ar_hand_recursion() {
        let sp = s1(3, 0.0);
        let panel = zero_panel(&sp, 3);
        let y = replay_outcome(&sp, &panel, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, vec![2.0, 1.0, 0.5]);
    }

    #[test]
    fn linear_general_hand_recursion() {
        let sp = spec(
            r#"{"horizon": 2, "outcome_law": "linear-general",
                "coefficients": {"beta": [1.0, 0.5], "u_process": {"kind": "zero"}},
                "treatment_mechanism": {"kind": "shock-normal", "sigma_eta": 1}}"#,
        );
        let panel = draw_noise(&sp, &derive_streams(1, 1));
        assert_eq!(replay_outcome(&sp, &panel, &[1.0, 1.0]).unwrap(), vec![1.0, 1.5]);
    }

    #[test]
    fn replay_errors() {
        let sp = s1(3, 0.0);
        let panel = draw_noise(&sp, &derive_streams(1, 1));
        assert!(replay_outcome(&sp, &panel, &[0.0; 4]).is_err());
        assert!(replay_outcome(&sp, &panel, &[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn panel_correlation_structure() {
        let n = 100_000;
        for (rho, tol) in [(0.0, 3.0 * 10f64.powf(-2.5)), (0.6, 0.01)] {
            let sp = s1(n, rho);
            let p = draw_noise(&sp, &derive_streams(42, 0));
            let r = correlation(&p.eps, &p.eta);
            assert!((r - rho).abs() < tol, "rho={rho} got {r}");
        }
    }

    #[test]
    fn same_streams_same_panel() {
        let sp = s1(50, 0.2);
        assert_eq!(draw_noise(&sp, &derive_streams(9, 4)), draw_noise(&sp, &derive_streams(9, 4)));
        assert_ne!(draw_noise(&sp, &derive_streams(9, 4)), draw_noise(&sp, &derive_streams(9, 5)));
    }

    #[test]
    fn shock_path_equals_eta() {
        let sp = s1(200, 0.0);
        let p = draw_noise(&sp, &derive_streams(3, 0));
        let b = simulate(&sp, &p);
        assert_eq!(b.w, p.eta);
    }

    #[test]
    fn bernoulli_mean() {
        let sp = spec(
            r#"{"horizon": 100000, "outcome_law": "binary-demo",
                "coefficients": {"beta0": 1, "beta1": 0.5, "u_process": {"kind": "iid-normal", "sigma": 1}},
                "treatment_mechanism": {"kind": "bernoulli-iid", "pi": 0.5}}"#,
        );
        let b = simulate(&sp, &draw_noise(&sp, &derive_streams(5, 0)));
        assert!((mean(&b.w) - 0.5).abs() < 0.005);
        assert!(b.propensity.iter().all(|p| *p == 0.5));
    }

    #[test]
    fn instrument_correlation() {
        let sp = spec(
            r#"{"horizon": 100000, "outcome_law": "linear-ar",
                "coefficients": {"phi": 0.5, "beta0": 2},
                "treatment_mechanism": {"kind": "shock-normal", "sigma_eta": 1},
                "instrument_block": {"alpha1": 0.8, "sigma_zeta": 0.5}}"#,
        );
        let b = simulate(&sp, &draw_noise(&sp, &derive_streams(6, 0)));
        let r = correlation(&b.w, b.what.as_ref().unwrap());
        assert!((r - 0.8 / 0.89f64.sqrt()).abs() < 0.01, "{r}");
    }

    #[test]
    fn propensity_values() {
        let sp = s1(5, 0.0);
        assert!((propensity(&sp, &[], &[], 0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        let pr = spec(
            r#"{"horizon": 5, "outcome_law": "linear-ar", "coefficients": {"phi": 0.4, "beta0": 1},
                "treatment_mechanism": {"kind": "policy-rule", "gamma": 0, "theta": 0, "delta": 0.2, "sigma_eta": 1}}"#,
        );
        let v = propensity(&pr, &[0.3], &[2.0], 0.4);
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15, "{v}");
        let bern = spec(
            r#"{"horizon": 5, "outcome_law": "binary-demo",
                "coefficients": {"beta0": 1, "beta1": 0.5, "u_process": {"kind": "zero"}},
                "treatment_mechanism": {"kind": "bernoulli-iid", "pi": 0.5}}"#,
        );
        assert_eq!(propensity(&bern, &[], &[], 1.0), 0.5);
    }

    #[test]
    fn recorded_propensities_match_propensity_fn() {
        let sp = spec(
            r#"{"horizon": 60, "outcome_law": "linear-ar", "coefficients": {"phi": 0.4, "beta0": 1},
                "treatment_mechanism": {"kind": "bernoulli-logistic", "a": 0.1, "b": 0.3, "c": -0.5}}"#,
        );
        let b = simulate(&sp, &draw_noise(&sp, &derive_streams(2, 2)));
        for t in 1..=60 {
            let p = propensity(&sp, &b.w[..t - 1], &b.y[..t - 1], b.w[t - 1]);
            assert_eq!(p, b.propensity[t - 1]);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn forward_shock_contrast_is_exact() {
        let sp = s1(20, 0.0);
        let world = World::new(&sp, derive_streams(11, 0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = ForwardDraws::draw(&mut rng, 1, 0.0);
        let a = intervene_forward(&world, 10, 1.0, 10, &d, ForwardMode::WeightedEffect).unwrap();
        let b = intervene_forward(&world, 10, 0.0, 10, &d, ForwardMode::WeightedEffect).unwrap();
        assert!((a.y[0] - b.y[0] - 2.0).abs() < 1e-12);
        let a = intervene_forward(&world, 10, 1.5, 10, &d, ForwardMode::Crf).unwrap();
        let b = intervene_forward(&world, 10, -0.5, 10, &d, ForwardMode::Crf).unwrap();
        assert!((a.y[0] - b.y[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn forward_weighted_mode_reproduces_factual_when_forced_to_factual() {
        // Forcing the factual value and feeding the panel's own eta back in must
        // reproduce the factual path exactly.
        let sp = spec(
            r#"{"horizon": 30, "outcome_law": "linear-ar", "coefficients": {"phi": 0.4, "beta0": 1},
                "treatment_mechanism": {"kind": "policy-rule", "gamma": 0, "theta": 0.2, "delta": 0.2, "sigma_eta": 1}}"#,
        );
        let world = World::new(&sp, derive_streams(3, 3));
        let t0 = 12;
        let d = ForwardDraws {
            eps: world.panel.eps[t0 - 1..].to_vec(),
            eta: world.panel.eta[t0 - 1..].to_vec(),
            uniform: world.panel.uniform[t0 - 1..].to_vec(),
        };
        for mode in [ForwardMode::WeightedEffect, ForwardMode::Crf] {
            let c = intervene_forward(&world, t0, world.factual.w[t0 - 1], 30, &d, mode).unwrap();
            assert_eq!(c.w, world.factual.w[t0 - 1..]);
            assert_eq!(c.y, world.factual.y[t0 - 1..]);
        }
    }

    #[test]
    fn forward_errors() {
        let sp = s1(5, 0.0);
        let world = World::new(&sp, derive_streams(1, 0));
        let d = ForwardDraws::draw(&mut ChaCha8Rng::seed_from_u64(0), 5, 0.0);
        assert!(intervene_forward(&world, 4, 1.0, 3, &d, ForwardMode::Crf).is_err());
        assert!(intervene_forward(&world, 2, f64::INFINITY, 3, &d, ForwardMode::Crf).is_err());
    }

    fn any_spec() -> impl Strategy<Value = ScenarioSpec> {
        prop_oneof![
            Just(s1(25, 0.0)),
            Just(spec(
                r#"{"horizon": 25, "outcome_law": "linear-general",
                "coefficients": {"beta": [1.0, -0.4, 0.3], "u_process": {"kind": "arch1", "omega": 0.5, "alpha": 0.4}},
                "treatment_mechanism": {"kind": "policy-rule", "gamma": 0.1, "theta": 0.3, "delta": -0.2, "sigma_eta": 1}}"#
            )),
            Just(spec(
                r#"{"horizon": 25, "outcome_law": "linear-general",
                "coefficients": {"beta": [0.7, 0.2], "u_process": {"kind": "random-walk", "sigma": 1}},
                "treatment_mechanism": {"kind": "shock-normal", "sigma_eta": 2}}"#
            )),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn replay_is_non_anticipating(sp in any_spec(), seed in any::<u64>(), cut in 1usize..25,
                                      w in proptest::collection::vec(-3.0f64..3.0, 25),
                                      tail in proptest::collection::vec(-3.0f64..3.0, 25)) {
            let panel = draw_noise(&sp, &derive_streams(seed, 0));
            let full = replay_outcome(&sp, &panel, &w).unwrap();
            let mut w2 = w.clone();
            w2[cut..].copy_from_slice(&tail[cut..]);
            let other = replay_outcome(&sp, &panel, &w2).unwrap();
            let prefix = replay_outcome(&sp, &panel, &w[..cut]).unwrap();
            prop_assert_eq!(&full[..cut], &other[..cut]);
            prop_assert_eq!(&full[..cut], &prefix[..]);
        }

        #[test]
        fn replay_is_superposable(sp in any_spec(), seed in any::<u64>(), a in -4.0f64..4.0,
                                  w in proptest::collection::vec(-3.0f64..3.0, 25)) {
            let panel = draw_noise(&sp, &derive_streams(seed, 1));
            let base = replay_outcome(&sp, &panel, &[0.0; 25]).unwrap();
            let yw = replay_outcome(&sp, &panel, &w).unwrap();
            let aw: Vec<f64> = w.iter().map(|x| a * x).collect();
            let yaw = replay_outcome(&sp, &panel, &aw).unwrap();
            for t in 0..25 {
                let lhs = yaw[t] - base[t];
                let rhs = a * (yw[t] - base[t]);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "t={} {} vs {}", t, lhs, rhs);
            }
        }

        #[test]
        fn replay_is_deterministic(sp in any_spec(), seed in any::<u64>(),
                                   w in proptest::collection::vec(-3.0f64..3.0, 25)) {
            let panel = draw_noise(&sp, &derive_streams(seed, 2));
            prop_assert_eq!(replay_outcome(&sp, &panel, &w).unwrap(), replay_outcome(&sp, &panel, &w).unwrap());
        }

        #[test]
        fn simulate_matches_replay_of_realized_treatments(sp in any_spec(), seed in any::<u64>()) {
            let panel = draw_noise(&sp, &derive_streams(seed, 3));
            let b = simulate(&sp, &panel);
            prop_assert_eq!(replay_outcome(&sp, &panel, &b.w).unwrap(), b.y);
        }
    }
}
