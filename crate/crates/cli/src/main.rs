//! `potlab` command-line front end.
//!
//! Exit status: 0 success, 2 configuration error, 3 applicability or
//! precondition error, 4 numerical failure.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use potlab::dgp::{draw_noise, simulate, World};
use potlab::estimands::{
    avg_crf, avg_weighted_effect, beta_projections, crf, crf_analytic, irf_mc, lag_p_effect,
    regression_irf_linear_gaussian, weighted_effect, write_estimands_csv, Continuation, EffectMode, EstimandLabel,
    EstimandMethod, EstimandValue, MAX_ENUMERATION_HORIZON,
};
use potlab::estimators::{lp_iv_plim_oracle, write_reports_csv, DensitySource, KernelKind, Regressor};
use potlab::harness::{
    rate_slopes, run_replications, write_experiment, EstimatorKind, ExperimentPlan, ScenarioRef,
};
use potlab::{derive_streams, Error, ErrorKind, PathBundle, Result, ScenarioSpec, DEFAULT_MASTER_SEED};

#[derive(Parser, Debug)]
#[command(name = "potlab", version, about = "Potential-outcome time series laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one factual path from a scenario.
    Simulate(SimulateArgs),
    /// Compute a ground-truth causal quantity.
    Estimand(EstimandArgs),
    /// Run an estimator on a path bundle.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment plan.
    Experiment(ExperimentArgs),
    /// Collect experiment outputs into summary tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's horizon.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum LabelArg {
    Tau,
    TauStar,
    Crf,
    AvgTauStar,
    AvgCrf,
    Irf,
    BetaL,
    BetaU,
    BetaUStar,
    BetaIv,
    RegressionIrf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    Exact,
    Analytic,
    Mc,
}

#[derive(Args, Debug)]
struct EstimandArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum)]
    label: LabelArg,
    /// Period; defaults to the horizon.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    p: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    w: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    wprime: f64,
    /// Monte Carlo draws (or replications, for projections).
    #[arg(long = "m", default_value_t = 10_000)]
    draws: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Burn-in for impulse responses; the scenario's when absent.
    #[arg(long)]
    burn_in: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum EstimatorArg {
    HtLagp,
    KernelLagp,
    KernelIrf,
    LpOls,
    LpIv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegressorArg {
    Treatment,
    Instrument,
    ScaledInstrument,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Path bundle CSV as written by `simulate`.
    #[arg(long)]
    bundle: PathBuf,
    /// Accepted for symmetry with other commands; recorded in the manifest only.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = 0)]
    p: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    w: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    wprime: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    kernel: KernelArg,
    /// `c` in `h = c (T - p)^(-1/5)`; `1.06 sd(W)` when absent.
    #[arg(long)]
    bandwidth_constant: Option<f64>,
    #[arg(long, value_enum, default_value_t = DensityArg::Oracle)]
    density: DensityArg,
    #[arg(long)]
    demean: bool,
    #[arg(long, value_enum, default_value_t = RegressorArg::Treatment)]
    regressor: RegressorArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    Gaussian,
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DensityArg {
    Oracle,
    Estimated,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Replaces the plan's scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Replaces the plan's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the plan's worker count.
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Directory holding one experiment output, or several as subdirectories.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimand(a) => cmd_estimand(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Configuration => 2,
                ErrorKind::Applicability => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        path: "scenario".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    ScenarioSpec::parse(&text)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn manifest(kind: &str, spec: Option<&ScenarioSpec>, seed: u64, extra: Value) -> Value {
    let mut m = json!({
        "kind": kind,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
    });
    if let Some(s) = spec {
        m["scenario_hash"] = json!(s.content_hash());
        m["scenario"] = s.to_json_value();
    }
    if let (Some(obj), Value::Object(more)) = (m.as_object_mut(), extra) {
        obj.extend(more);
    }
    m
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut spec = load_scenario(&a.scenario)?;
    if let Some(h) = a.horizon {
        spec = spec.with_horizon(h);
        spec.validate()?;
    }
    let panel = draw_noise(&spec, &derive_streams(a.common.seed, 0));
    let bundle = simulate(&spec, &panel);
    fs::create_dir_all(&a.common.out)?;
    let file = match a.common.format {
        Format::Csv => {
            bundle.write_csv(fs::File::create(a.common.out.join("bundle.csv"))?)?;
            "bundle.csv"
        }
        Format::Json => {
            write_json(&a.common.out.join("bundle.json"), &bundle)?;
            "bundle.json"
        }
    };
    let m = manifest("simulate", Some(&spec), a.common.seed, json!({"replication_id": 0, "output": file}));
    write_json(&a.common.out.join("manifest.json"), &m)
}

fn label_of(l: LabelArg) -> EstimandLabel {
    match l {
        LabelArg::Tau => EstimandLabel::Tau,
        LabelArg::TauStar => EstimandLabel::TauStar,
        LabelArg::Crf => EstimandLabel::Crf,
        LabelArg::AvgTauStar => EstimandLabel::AvgTauStar,
        LabelArg::AvgCrf => EstimandLabel::AvgCrf,
        LabelArg::Irf => EstimandLabel::Irf,
        LabelArg::BetaL => EstimandLabel::BetaL,
        LabelArg::BetaU => EstimandLabel::BetaU,
        LabelArg::BetaUStar => EstimandLabel::BetaUStar,
        LabelArg::BetaIv => EstimandLabel::BetaIv,
        LabelArg::RegressionIrf => EstimandLabel::RegressionIrf,
    }
}

fn exact_supported(label: LabelArg, spec: &ScenarioSpec) -> bool {
    match label {
        // a replay along the observed continuation, no averaging
        LabelArg::Tau => true,
        LabelArg::TauStar | LabelArg::AvgTauStar => {
            spec.treatment.is_discrete() && spec.horizon <= MAX_ENUMERATION_HORIZON
        }
        _ => false,
    }
}

fn analytic_supported(label: LabelArg, spec: &ScenarioSpec) -> bool {
    match label {
        LabelArg::Crf | LabelArg::Irf | LabelArg::RegressionIrf => spec.linear_gaussian_params().is_some(),
        LabelArg::BetaIv => spec.instrument.is_some(),
        _ => false,
    }
}

fn not_supported(label: LabelArg, method: &str) -> Error {
    Error::NotApplicable(format!("{method} is not available for {}", label_of(label).as_str()))
}

fn compute_estimand(a: &EstimandArgs, spec: &ScenarioSpec) -> Result<Vec<EstimandValue>> {
    let method = match a.method {
        MethodArg::Auto if exact_supported(a.label, spec) => MethodArg::Exact,
        MethodArg::Auto if analytic_supported(a.label, spec) => MethodArg::Analytic,
        MethodArg::Auto => MethodArg::Mc,
        m => m,
    };
    let (p, w, wp) = (a.p, a.w, a.wprime);
    let t = a.t.unwrap_or(spec.horizon);
    let seed = a.common.seed;
    let world = || World::new(spec, derive_streams(seed, 0));
    let one = |v: Result<EstimandValue>| v.map(|v| vec![v]);
    match (a.label, method) {
        (LabelArg::Tau, MethodArg::Exact | MethodArg::Mc) => {
            one(lag_p_effect(&world(), t, p, w, wp, &Continuation::Observed, &Continuation::Observed))
        }
        (LabelArg::TauStar, MethodArg::Exact) => one(weighted_effect(&world(), t, p, w, wp, EffectMode::Exact)),
        (LabelArg::TauStar, MethodArg::Mc) => {
            one(weighted_effect(&world(), t, p, w, wp, EffectMode::MonteCarlo { draws: a.draws }))
        }
        (LabelArg::AvgTauStar, MethodArg::Exact) => one(avg_weighted_effect(&world(), p, w, wp, EffectMode::Exact)),
        (LabelArg::AvgTauStar, MethodArg::Mc) => {
            one(avg_weighted_effect(&world(), p, w, wp, EffectMode::MonteCarlo { draws: a.draws }))
        }
        (LabelArg::Crf, MethodArg::Analytic) => one(crf_analytic(spec, p, w, wp)),
        (LabelArg::Crf, MethodArg::Mc) => one(crf(&world(), t, p, w, wp, a.draws)),
        (LabelArg::AvgCrf, MethodArg::Mc) => one(avg_crf(&world(), p, w, wp, a.draws)),
        (LabelArg::Irf, MethodArg::Analytic) => {
            one(crf_analytic(spec, p, w, wp).map(|v| EstimandValue { label: EstimandLabel::Irf, t: None, ..v }))
        }
        (LabelArg::Irf, MethodArg::Mc) => {
            one(irf_mc(spec, p, w, wp, a.draws, a.burn_in.unwrap_or(spec.burn_in), seed))
        }
        (LabelArg::RegressionIrf, MethodArg::Analytic) => {
            let params = spec
                .linear_gaussian_params()
                .ok_or_else(|| not_supported(a.label, "the closed form (needs a linear-Gaussian scenario)"))?;
            one(regression_irf_linear_gaussian(&params, p, w, wp))
        }
        (LabelArg::BetaIv, MethodArg::Analytic) => {
            let o = lp_iv_plim_oracle(spec, p)?;
            if let Some(msg) = &o.warning {
                eprintln!("warning: {msg}");
            }
            Ok(vec![EstimandValue {
                label: EstimandLabel::BetaIv,
                t: None,
                p,
                w: 1.0,
                wprime: 0.0,
                value: o.target,
                method: EstimandMethod::Analytic,
                mc_draws: 0,
                mc_se: 0.0,
            }])
        }
        (LabelArg::BetaL | LabelArg::BetaU | LabelArg::BetaUStar, MethodArg::Mc) => {
            let b = beta_projections(spec, p, a.draws, seed)?;
            Ok(match a.label {
                LabelArg::BetaL => b.beta_l,
                LabelArg::BetaU => vec![b.beta_u],
                _ => vec![b.beta_u_star],
            })
        }
        (_, MethodArg::Exact) => {
            if !spec.treatment.is_discrete() {
                Err(Error::NotApplicable("exact requires discrete mechanism".into()))
            } else {
                Err(not_supported(a.label, "exact enumeration"))
            }
        }
        (_, MethodArg::Analytic) => Err(not_supported(a.label, "a closed form")),
        (_, _) => Err(not_supported(a.label, "Monte Carlo")),
    }
}

fn cmd_estimand(a: EstimandArgs) -> Result<()> {
    let spec = load_scenario(&a.scenario)?;
    let rows = compute_estimand(&a, &spec)?;
    let out = &a.common.out;
    fs::create_dir_all(out)?;
    let file = match a.common.format {
        Format::Csv => {
            write_estimands_csv(&rows, fs::File::create(out.join("estimands.csv"))?)?;
            "estimands.csv"
        }
        Format::Json => {
            write_json(&out.join("estimands.json"), &rows)?;
            "estimands.json"
        }
    };
    let request = json!({
        "label": label_of(a.label).as_str(),
        "t": a.t,
        "p": a.p,
        "w": a.w,
        "wprime": a.wprime,
        "m": a.draws,
        "method": format!("{:?}", a.method).to_lowercase(),
        "burn_in": a.burn_in,
    });
    let m = manifest("estimand", Some(&spec), a.common.seed, json!({"request": request, "output": file}));
    write_json(&out.join("manifest.json"), &m)
}

fn estimator_of(a: &EstimateArgs) -> EstimatorKind {
    let kernel = match a.kernel {
        KernelArg::Gaussian => KernelKind::Gaussian,
        KernelArg::Epanechnikov => KernelKind::Epanechnikov,
    };
    let (p, w, wprime, bandwidth_constant) = (a.p, a.w, a.wprime, a.bandwidth_constant);
    match a.estimator {
        EstimatorArg::HtLagp => EstimatorKind::HtLagp { p, w, wprime },
        EstimatorArg::KernelLagp => EstimatorKind::KernelLagp {
            p,
            w,
            wprime,
            kernel,
            bandwidth_constant,
            density: match a.density {
                DensityArg::Oracle => DensitySource::Oracle,
                DensityArg::Estimated => DensitySource::Estimated,
            },
        },
        EstimatorArg::KernelIrf => EstimatorKind::KernelIrf { p, w, wprime, kernel, bandwidth_constant },
        EstimatorArg::LpOls => EstimatorKind::LpOls {
            p,
            demean: a.demean,
            regressor: match a.regressor {
                RegressorArg::Treatment => Regressor::Treatment,
                RegressorArg::Instrument => Regressor::Instrument,
                RegressorArg::ScaledInstrument => Regressor::ScaledInstrument { alpha0: a.alpha0, alpha1: a.alpha1 },
            },
        },
        EstimatorArg::LpIv => EstimatorKind::LpIv { p },
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let bytes = fs::read(&a.bundle).map_err(|e| Error::Config {
        path: "bundle".into(),
        message: format!("{}: {e}", a.bundle.display()),
    })?;
    let bundle = PathBundle::read_csv(bytes.as_slice())?;
    let spec = a.scenario.as_deref().map(load_scenario).transpose()?;
    let est = estimator_of(&a);
    let report = est.estimate(&bundle)?;
    let out = &a.common.out;
    fs::create_dir_all(out)?;
    let file = match a.common.format {
        Format::Csv => {
            write_reports_csv(std::slice::from_ref(&report), fs::File::create(out.join("report.csv"))?)?;
            "report.csv"
        }
        Format::Json => {
            write_json(&out.join("report.json"), &report)?;
            "report.json"
        }
    };
    let m = manifest(
        "estimate",
        spec.as_ref(),
        a.common.seed,
        json!({
            "bundle": a.bundle.display().to_string(),
            "bundle_sha256": potlab::bundle::sha256_hex(&bytes),
            "estimator": est,
            "output": file,
        }),
    );
    write_json(&out.join("manifest.json"), &m)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&a.plan).map_err(|e| Error::Config {
        path: "plan".into(),
        message: format!("{}: {e}", a.plan.display()),
    })?;
    let mut plan = ExperimentPlan::parse(&text)?;
    let spec = match &a.scenario {
        Some(path) => load_scenario(path)?,
        None => plan.resolve_scenario(a.plan.parent())?,
    };
    plan.scenario = ScenarioRef::Inline(spec.to_json_value());
    if let Some(seed) = a.seed {
        plan.master_seed = seed;
    }
    if let Some(n) = a.parallelism {
        plan.parallelism = n;
    }
    plan.validate(&spec)?;
    let table = run_replications(&plan, &spec)?;
    write_experiment(&a.out, &plan, &spec, &table)?;
    if a.format == Format::Json {
        write_json(&a.out.join("metrics.json"), &json!({"cells": table.cells, "rate_slopes": rate_slopes(&table)}))?;
    }
    for c in table.cells.iter().filter(|c| c.failures > 0) {
        eprintln!("warning: {} p={} T={}: {} of {} replications failed", c.estimator, c.p, c.t, c.failures, c.replications);
    }
    Ok(())
}

struct Run {
    id: String,
    manifest: Value,
    metrics: csv::StringRecord,
    rows: Vec<csv::StringRecord>,
    slopes: Vec<csv::StringRecord>,
}

fn read_run(dir: &Path) -> Result<Option<Run>> {
    let (mpath, cpath) = (dir.join("manifest.json"), dir.join("metrics.csv"));
    if !mpath.is_file() || !cpath.is_file() {
        return Ok(None);
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(&mpath)?)?;
    let mut rdr = csv::Reader::from_path(&cpath)?;
    let metrics = rdr.headers()?.clone();
    let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    let spath = dir.join("rate_slopes.csv");
    let slopes = if spath.is_file() {
        csv::Reader::from_path(&spath)?.records().collect::<std::result::Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| ".".into());
    Ok(Some(Run { id, manifest, metrics, rows, slopes }))
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    if !a.input.is_dir() {
        return Err(Error::Config { path: "input".into(), message: format!("{} is not a directory", a.input.display()) });
    }
    let mut dirs = vec![a.input.clone()];
    let mut subdirs: Vec<PathBuf> =
        fs::read_dir(&a.input)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    subdirs.sort();
    dirs.extend(subdirs);

    let mut seen = BTreeSet::new();
    let mut runs = Vec::new();
    let mut duplicates = Vec::new();
    for d in dirs {
        let Some(run) = read_run(&d)? else { continue };
        if !seen.insert(serde_json::to_string(&run.manifest)?) {
            eprintln!("warning: {} has a manifest identical to an earlier run; skipping duplicate", d.display());
            duplicates.push(run.id);
            continue;
        }
        runs.push(run);
    }
    if runs.is_empty() {
        return Err(Error::Precondition(format!("no experiment outputs found in {}", a.input.display())));
    }

    fs::create_dir_all(&a.out)?;
    let expected = ["estimator", "T", "p", "mean", "bias", "sd", "rmse", "coverage", "mean_se", "ks"];
    let mut summary = Vec::new();
    let mut long = csv::Writer::from_path(a.out.join("long.csv"))?;
    long.write_record(["run", "estimator", "p", "T", "metric", "value"])?;
    for run in &runs {
        if run.metrics.iter().ne(expected.iter().copied()) {
            return Err(Error::Config { path: format!("{}/metrics.csv", run.id), message: "unexpected header".into() });
        }
        for r in &run.rows {
            let mut rec = vec![run.id.clone()];
            rec.extend(r.iter().map(str::to_string));
            summary.push(rec);
            for (k, name) in expected.iter().enumerate().skip(3) {
                long.write_record([&run.id, &r[0], &r[2], &r[1], *name, &r[k]])?;
            }
        }
    }
    long.flush()?;

    let header: Vec<&str> = std::iter::once("run").chain(expected).collect();
    match a.format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(a.out.join("summary.csv"))?;
            w.write_record(&header)?;
            for rec in &summary {
                w.write_record(rec)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = summary
                .iter()
                .map(|rec| Value::Object(header.iter().zip(rec).map(|(h, v)| (h.to_string(), json!(v))).collect()))
                .collect();
            write_json(&a.out.join("summary.json"), &rows)?;
        }
    }
    let mut w = csv::Writer::from_path(a.out.join("rate_slopes.csv"))?;
    w.write_record(["run", "estimator", "p", "slope", "se", "points"])?;
    for run in &runs {
        for s in &run.slopes {
            let mut rec = vec![run.id.as_str()];
            rec.extend(s.iter());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;

    let listed: Vec<Value> = runs
        .iter()
        .map(|r| {
            json!({
                "run": r.id,
                "scenario_hash": r.manifest.get("scenario_hash"),
                "master_seed": r.manifest.get("master_seed"),
            })
        })
        .collect();
    write_json(
        &a.out.join("manifest.json"),
        &json!({"kind": "report", "tool_version": env!("CARGO_PKG_VERSION"), "runs": listed, "duplicates_skipped": duplicates}),
    )
}
