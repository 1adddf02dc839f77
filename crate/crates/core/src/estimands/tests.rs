use super::*;
use crate::dgp::draw_noise;

pub(crate) fn spec(doc: &str) -> ScenarioSpec {
    ScenarioSpec::parse(doc).unwrap()
}

fn s1(t: usize) -> ScenarioSpec {
    spec(&format!(
        r#"{{"horizon": {t}, "outcome_law": "linear-ar", "coefficients": {{"mu": 0, "phi": 0.5, "beta0": 2}},
            "treatment_mechanism": {{"kind": "shock-normal", "sigma_eta": 1}}}}"#
    ))
}

fn s2(t: usize) -> ScenarioSpec {
    spec(&format!(
        r#"{{"horizon": {t}, "outcome_law": "linear-ar", "coefficients": {{"phi": 0.4, "beta0": 1}},
            "treatment_mechanism": {{"kind": "policy-rule", "gamma": 0, "theta": 0.2, "delta": 0.2, "sigma_eta": 1}}}}"#
    ))
}

fn s3(t: usize) -> ScenarioSpec {
    spec(&format!(
        r#"{{"horizon": {t}, "outcome_law": "binary-demo",
            "coefficients": {{"beta0": 1, "beta1": 0.5, "u_process": {{"kind": "iid-normal", "sigma": 1}}}},
            "treatment_mechanism": {{"kind": "bernoulli-iid", "pi": 0.5}}}}"#
    ))
}

/// Impulse propagated through the two equations by hand:
/// `w_k = theta w_{k-1} + delta y_{k-1}`, `y_k = phi y_{k-1} + beta0 w_k`.
fn hand_impulse(phi: f64, beta0: f64, theta: f64, delta: f64, p: usize) -> f64 {
    let (mut y, mut w) = (beta0, 1.0);
    for _ in 0..p {
        let wn = theta * w + delta * y;
        y = phi * y + beta0 * wn;
        w = wn;
    }
    y
}

fn within(v: &EstimandValue, target: f64) -> bool {
    (v.value - target).abs() <= 3.0 * v.mc_se + 1e-9
}

#[test]
fn lag_p_effect_examples() {
    let world = World::new(&s1(20), derive_streams(1, 0));
    let cont = Continuation::Path(vec![0.3, -1.2]);
    let v = lag_p_effect(&world, 10, 2, 1.0, 0.0, &cont, &cont).unwrap();
    assert!((v.value - 0.5).abs() < 1e-12);
    assert_eq!(v.method, EstimandMethod::ExactEnumeration);
    let v = lag_p_effect(&world, 10, 2, 0.7, 0.7, &Continuation::Observed, &Continuation::Observed).unwrap();
    assert_eq!(v.value, 0.0);
    let v = lag_p_effect(&world, 10, 1, 3.0, 1.0, &Continuation::Observed, &Continuation::Observed).unwrap();
    assert!((v.value - 2.0).abs() < 1e-12);
    assert!(lag_p_effect(&world, 3, 3, 1.0, 0.0, &Continuation::Observed, &Continuation::Observed).is_err());
    assert!(lag_p_effect(&world, 5, 2, 1.0, 0.0, &Continuation::Path(vec![1.0]), &Continuation::Observed).is_err());
}

#[test]
fn weighted_effect_examples() {
    let w3 = World::new(&s3(6), derive_streams(2, 0));
    let v = weighted_effect(&w3, 4, 1, 1.0, 0.0, EffectMode::Exact).unwrap();
    assert!((v.value - 0.5).abs() < 1e-12, "{v:?}");

    let w1 = World::new(&s1(30), derive_streams(2, 0));
    let v = weighted_effect(&w1, 20, 1, 1.0, 0.0, EffectMode::MonteCarlo { draws: 2000 }).unwrap();
    assert!(within(&v, 1.0), "{v:?}");
    let v = weighted_effect(&w1, 20, 0, 1.5, -0.5, EffectMode::MonteCarlo { draws: 10 }).unwrap();
    assert!((v.value - 4.0).abs() < 1e-12);
    assert_eq!(v.mc_se, 0.0);
    assert!(matches!(
        weighted_effect(&w1, 20, 1, 1.0, 0.0, EffectMode::Exact),
        Err(Error::NotApplicable(_))
    ));
}

#[test]
fn weighted_effect_exact_matches_mc_on_logistic() {
    let sp = spec(
        r#"{"horizon": 8, "outcome_law": "linear-ar", "coefficients": {"phi": 0.5, "beta0": 1},
            "treatment_mechanism": {"kind": "bernoulli-logistic", "a": -0.2, "b": 0.8, "c": 0.5}}"#,
    );
    let world = World::new(&sp, derive_streams(4, 0));
    let ex = weighted_effect(&world, 8, 3, 1.0, 0.0, EffectMode::Exact).unwrap();
    let mc = weighted_effect(&world, 8, 3, 1.0, 0.0, EffectMode::MonteCarlo { draws: 100_000 }).unwrap();
    assert!((ex.value - mc.value).abs() <= 4.0 * mc.mc_se, "{ex:?} {mc:?}");
}

#[test]
fn crf_examples() {
    let w1 = World::new(&s1(30), derive_streams(3, 0));
    let v = crf(&w1, 25, 2, 1.0, 0.0, 1000).unwrap();
    assert!(within(&v, 0.5), "{v:?}");
    let w2 = World::new(&s2(30), derive_streams(3, 0));
    let v = crf(&w2, 25, 1, 1.0, 0.0, 5000).unwrap();
    assert!(within(&v, 0.8), "{v:?}");
    let v = crf(&w2, 25, 3, 0.4, 0.4, 500).unwrap();
    assert_eq!(v.value, 0.0);
    assert!(crf(&w2, 25, 1, 1.0, 0.0, 99).is_err());
}

#[test]
fn crf_scale_equivariance() {
    let w2 = World::new(&s2(30), derive_streams(3, 1));
    let a = crf(&w2, 25, 2, 1.0, 0.0, 500).unwrap();
    let b = crf(&w2, 25, 2, 2.0, 0.0, 500).unwrap();
    assert!((b.value - 2.0 * a.value).abs() < 1e-9);
}

#[test]
fn companion_closed_form() {
    let params = s2(10).linear_gaussian_params().unwrap();
    for (p, want) in [(0, 1.0), (1, 0.8), (2, 0.56), (3, 0.384)] {
        let v = crf_linear_gaussian(&params, p, 1.0, 0.0).unwrap();
        assert!((v.value - want).abs() < 1e-12, "p={p}: {}", v.value);
        assert!((v.value - hand_impulse(0.4, 1.0, 0.2, 0.2, p)).abs() < 1e-12);
        assert_eq!(v.method, EstimandMethod::Analytic);
    }
    let mut explosive = params;
    explosive.phi = 0.95;
    explosive.delta = 0.5;
    assert!(matches!(crf_linear_gaussian(&explosive, 1, 1.0, 0.0), Err(Error::Explosive { .. })));
    assert!(crf_analytic(&s3(5), 1, 1.0, 0.0).is_err());
}

#[test]
fn regression_irf_matches_long_sample() {
    let p1 = s1(10).linear_gaussian_params().unwrap();
    assert!((regression_irf_linear_gaussian(&p1, 1, 1.0, 0.0).unwrap().value - 1.0).abs() < 1e-12);
    let params = s2(10).linear_gaussian_params().unwrap();
    let n = 400_000;
    let world = World::new(&s2(n), derive_streams(8, 0));
    let b = &world.factual;
    for p in 0..3 {
        let target = regression_irf_linear_gaussian(&params, p, 1.0, 0.0).unwrap().value;
        let y = &b.y[p + 1000..];
        let w = &b.w[1000..n - p];
        let (my, mw) = (mean(y), mean(w));
        let cov: f64 = y.iter().zip(w).map(|(a, c)| (a - my) * (c - mw)).sum::<f64>() / y.len() as f64;
        let var: f64 = w.iter().map(|c| (c - mw).powi(2)).sum::<f64>() / w.len() as f64;
        assert!((cov / var - target).abs() < 0.02, "p={p} sample {} oracle {target}", cov / var);
    }
}

#[test]
fn averages() {
    let w3 = World::new(&s3(5), derive_streams(5, 0));
    let v = avg_weighted_effect(&w3, 1, 1.0, 0.0, EffectMode::Exact).unwrap();
    assert!((v.value - 0.5).abs() < 1e-12);

    let t = 10;
    let tv = spec(&format!(
        r#"{{"horizon": {t}, "outcome_law": "linear-general",
            "coefficients": {{"beta_segments": [{{"from": 1, "beta": [1.0, 0.5]}}, {{"from": {}, "beta": [1.0, 0.6]}}],
                             "u_process": {{"kind": "iid-normal", "sigma": 1}}}},
            "treatment_mechanism": {{"kind": "shock-normal", "sigma_eta": 1}}}}"#,
        t / 2 + 1
    ));
    let world = World::new(&tv, derive_streams(5, 1));
    let v = avg_weighted_effect(&world, 1, 1.0, 0.0, EffectMode::MonteCarlo { draws: 200 }).unwrap();
    let direct: f64 = (2..=t).map(|s| if s > t / 2 { 0.6 } else { 0.5 }).sum::<f64>() / (t - 1) as f64;
    assert!((v.value - direct).abs() < 1e-12, "{} vs {direct}", v.value);

    let w1 = World::new(&s1(12), derive_streams(5, 2));
    let avg = avg_weighted_effect(&w1, 2, 1.0, 0.0, EffectMode::MonteCarlo { draws: 300 }).unwrap();
    let one = weighted_effect(&w1, 7, 2, 1.0, 0.0, EffectMode::MonteCarlo { draws: 300 }).unwrap();
    assert!((avg.value - one.value).abs() < 1e-9);
}

#[test]
fn irf_examples() {
    let v = irf_mc(&s1(10), 1, 1.0, 0.0, 2000, 200, 11).unwrap();
    assert!(within(&v, 1.0), "{v:?}");
    let v = irf_mc(&s2(10), 1, 1.0, 0.0, 4000, 200, 11).unwrap();
    assert!(within(&v, 0.8), "{v:?}");
    assert_eq!(irf_mc(&s2(10), 2, 2.0, 2.0, 100, 50, 11).unwrap().value, 0.0);
    let rw = spec(
        r#"{"horizon": 10, "outcome_law": "linear-general",
            "coefficients": {"beta": [1.0], "u_process": {"kind": "random-walk", "sigma": 1}},
            "treatment_mechanism": {"kind": "shock-normal", "sigma_eta": 1}}"#,
    );
    assert!(matches!(irf_mc(&rw, 1, 1.0, 0.0, 100, 10, 0), Err(Error::NotApplicable(_))));
}

#[test]
fn projections() {
    let bp = beta_projections(&s1(60), 1, 4000, 9).unwrap();
    for v in &bp.beta_l[30..] {
        assert!((v.value - 1.0).abs() < 4.0 * v.mc_se, "{v:?}");
    }
    assert!((bp.beta_u.value - 1.0).abs() < 3.0 * bp.beta_u.mc_se);
    assert!((bp.beta_u_star.value - 1.0).abs() < 1e-12);

    let t = 40;
    let tv = spec(&format!(
        r#"{{"horizon": {t}, "outcome_law": "linear-general",
            "coefficients": {{"beta_segments": [{{"from": 1, "beta": [0.0, 0.5]}}, {{"from": {}, "beta": [0.0, 1.5]}}],
                             "u_process": {{"kind": "iid-normal", "sigma": 1}}}},
            "treatment_mechanism": {{"kind": "shock-normal", "sigma_eta": 1,
                                    "sigma_eta_segments": [{{"from": {}, "value": 2}}]}}}}"#,
        t / 2 + 2,
        t / 2 + 1
    ));
    let bp = beta_projections(&tv, 1, 4000, 10).unwrap();
    let h = (t / 2) as f64;
    let exact = (0.5 * h + 1.5 * 4.0 * (h - 1.0)) / (h + 4.0 * (h - 1.0));
    assert!((bp.beta_u_star.value - exact).abs() < 1e-12);
    assert!((bp.beta_u.value - exact).abs() < 3.0 * bp.beta_u.mc_se, "{:?} vs {exact}", bp.beta_u);
    assert!(matches!(beta_projections(&s2(10), 1, 10, 0), Err(Error::NotApplicable(_))));
}

fn ht(b: &PathBundleRef, p: usize) -> f64 {
    let n = b.0.len();
    let terms: Vec<f64> = (p + 1..=n)
        .map(|t| {
            let x = b.0[t - p - 1];
            let ind = if x == 1.0 { 1.0 } else { -1.0 };
            b.1[t - 1] * ind / b.2[t - p - 1]
        })
        .collect();
    terms.iter().sum::<f64>() / terms.len() as f64
}

struct PathBundleRef<'a>(&'a [f64], &'a [f64], &'a [f64]);

#[test]
fn enumeration_ht_unbiased_and_variance_identity() {
    let sp = s3(3);
    let panel = draw_noise(&sp, &derive_streams(12, 0));
    let en = ExactEnumeration::new(&sp, &panel).unwrap();
    assert_eq!(en.path_count(), 8);
    let target = en.expected_avg_tau_star(1, 1.0, 0.0).unwrap();
    assert!((target.value - 0.5).abs() < 1e-12);
    let (m, _) = en.sampling_moments(|b| Ok(ht(&PathBundleRef(&b.w, &b.y, &b.propensity), 1))).unwrap();
    assert!((m - target.value).abs() < 1e-12);
    let err2 = en.error_second_moment(1, 1.0, 0.0, |b| Ok(ht(&PathBundleRef(&b.w, &b.y, &b.propensity), 1))).unwrap();
    let oracle = en.ht_variance_oracle(1, 1.0, 0.0).unwrap();
    assert!((err2 - oracle.eta_bar / 2.0).abs() < 1e-12 * err2.max(1.0), "{err2} vs {}", oracle.eta_bar / 2.0);
}

#[test]
fn per_period_eta_equals_term_variance_for_feedback() {
    let sp = spec(
        r#"{"horizon": 6, "outcome_law": "linear-ar", "coefficients": {"phi": 0.5, "beta0": 1},
            "treatment_mechanism": {"kind": "bernoulli-logistic", "a": 0.1, "b": 0.7, "c": -0.4}}"#,
    );
    let panel = draw_noise(&sp, &derive_streams(13, 0));
    let en = ExactEnumeration::new(&sp, &panel).unwrap();
    let oracle = en.ht_variance_oracle(2, 1.0, 0.0).unwrap();
    for t in 3..=6 {
        let (tau, _) = en.tau_star_by_history(t, 2, 1.0, 0.0).unwrap();
        let v = en
            .sampling_moments(|b| {
                let x = b.w[t - 3];
                let term = b.y[t - 1] * if x == 1.0 { 1.0 } else { -1.0 } / b.propensity[t - 3];
                let h = (0..t - 3).fold(0usize, |acc, k| acc | ((b.w[k] as usize) << k));
                Ok((term - tau[h]).powi(2))
            })
            .unwrap()
            .0;
        assert!((v - oracle.eta_sq[t - 3]).abs() < 1e-10 * v.max(1.0), "t={t}: {v} vs {}", oracle.eta_sq[t - 3]);
    }
}

#[test]
fn enumeration_preconditions() {
    let det = spec(
        r#"{"horizon": 3, "outcome_law": "binary-demo",
            "coefficients": {"beta0": 1, "beta1": 0.5, "u_process": {"kind": "zero"}},
            "treatment_mechanism": {"kind": "bernoulli-logistic", "a": 50, "b": 0, "c": 0}}"#,
    );
    let panel = draw_noise(&det, &derive_streams(0, 0));
    assert!(matches!(ExactEnumeration::new(&det, &panel), Err(Error::Precondition(_))));
    let long = s3(13);
    assert!(ExactEnumeration::new(&long, &draw_noise(&long, &derive_streams(0, 0))).is_err());
    let cont = s1(3);
    assert!(matches!(ExactEnumeration::new(&cont, &draw_noise(&cont, &derive_streams(0, 0))), Err(Error::NotApplicable(_))));
}

#[test]
fn zero_outcomes_have_zero_eta() {
    let sp = spec(
        r#"{"horizon": 4, "outcome_law": "binary-demo",
            "coefficients": {"beta0": 0, "beta1": 0, "u_process": {"kind": "zero"}},
            "treatment_mechanism": {"kind": "bernoulli-iid", "pi": 0.3}}"#,
    );
    let en = ExactEnumeration::new(&sp, &draw_noise(&sp, &derive_streams(0, 0))).unwrap();
    let o = en.ht_variance_oracle(1, 1.0, 0.0).unwrap();
    assert!(o.eta_sq.iter().all(|v| *v == 0.0));
}

#[test]
fn csv_rows() {
    let v = EstimandValue::analytic(EstimandLabel::Crf, None, 1, 1.0, 0.0, 0.8);
    let mut buf = Vec::new();
    write_estimands_csv(&[v], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "label,t,p,w,wprime,value,method,mc_draws,mc_se");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "crf");
    assert_eq!(row[1], "");
    assert_eq!(row[5].parse::<f64>().unwrap(), 0.8);
    assert_eq!(row[6], "analytic");
}
