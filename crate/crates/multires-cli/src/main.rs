//! Command-line front end for the multi-resolution error experiments.
//!
//! Seven subcommands regenerate the study's tables and figures from
//! JSON configurations: exact linear prediction-error curves, Monte
//! Carlo selection tables, descent structure of the error curve,
//! convergence-rate fits, covariate-ordering probes, tree
//! estimation-error curves, and criterion-mean figures. Every
//! subcommand reads one JSON config, applies `--set key=value`
//! overrides (dotted paths reach nested fields and array elements),
//! and writes CSV and JSON reports plus optional SVG charts into one
//! output directory.
//!
//! The output directory is `--out` when given, else the
//! `MULTIRES_OUT` environment variable, else the current directory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 domain error
//! (a mathematically undefined request), 4 internal or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use multires::chart::{write_svg, ChartOptions, Series};
use multires::curve::strict_local_minima;
use multires::emit::{self, DescentRow, PeExactRow, TreeCurveRow};
use multires::error::{Error, Result};
use multires::harness::{self, ExperimentConfig};
use multires::linear::{self, LinearModelSpec};
use multires::ordering::{self, PermSpec};
use multires::profile::{BiasProfile, ProfileKind};
use multires::rates::{self, ErrorModel, RateTransform};
use multires::tree::{self, TreeModelSpec};

#[derive(Parser)]
#[command(
    name = "multires",
    version,
    about = "Multi-resolution prediction error experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact linear prediction-error curve (pe_exact.csv)
    Curve(CommonArgs),
    /// Monte Carlo resolution-selection table (table.csv, table.json)
    Simulate(CommonArgs),
    /// Descent structure of the exact curve (descent.csv)
    Descent(CommonArgs),
    /// Optimal-resolution and loss scaling fit (rates.csv, rates.json)
    Rates(CommonArgs),
    /// Misordered-covariate probe (ordering.csv, ordering_ratio.csv, ordering.json)
    Ordering(CommonArgs),
    /// Tree estimation-error curve with its upper bound (tree_curve.csv)
    TreeCurve(CommonArgs),
    /// Criterion means against the exact curve (figure.csv)
    Figure(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (JSON object)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $MULTIRES_OUT, else ".")
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render an SVG chart of the main output
    #[arg(long)]
    svg: bool,
    /// Config override, e.g. --set tau2=0.5 or --set profile.params.xi=2
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for --set master_seed=<SEED>
    #[arg(long)]
    seed: Option<u64>,
    /// Thread count for replication loops (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Stable exit-code mapping; golden-tested.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Domain(_) => 3,
        Error::Internal(_) | Error::Io(_) => 4,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let (args, handler): (&CommonArgs, fn(&CommonArgs) -> Result<()>) = match &cli.command {
        Command::Curve(a) => (a, cmd_curve),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Descent(a) => (a, cmd_descent),
        Command::Rates(a) => (a, cmd_rates),
        Command::Ordering(a) => (a, cmd_ordering),
        Command::TreeCurve(a) => (a, cmd_tree_curve),
        Command::Figure(a) => (a, cmd_figure),
    };
    match args.workers {
        Some(w) => harness::with_workers(w, || handler(args))?,
        None => handler(args),
    }
}

/// Reads the JSON config, applies overrides, and deserializes into the
/// subcommand's config type. Unknown fields are rejected, so a typo in
/// --set fails here with the field named.
fn load_config<T: serde::de::DeserializeOwned>(args: &CommonArgs) -> Result<T> {
    let path = &args.config;
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&raw)
        .map_err(|e| Error::Config(format!("config {} does not parse: {e}", path.display())))?;
    if !value.is_object() {
        return Err(Error::Config(format!(
            "config {} must be a JSON object",
            path.display()
        )));
    }
    for kv in &args.set {
        apply_override(&mut value, kv)?;
    }
    if let Some(seed) = args.seed {
        set_path(&mut value, "master_seed", serde_json::Value::from(seed))?;
    }
    serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
}

/// Splits one `key=value` override and writes it into the config tree.
/// The value is parsed as JSON when possible, else taken as a string,
/// so `--set profile.kind=Exponential` needs no quoting.
fn apply_override(root: &mut serde_json::Value, kv: &str) -> Result<()> {
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {kv:?} is not of the form key=value")))?;
    if key.is_empty() {
        return Err(Error::Config(format!("override {kv:?} has an empty key")));
    }
    let value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_owned()));
    set_path(root, key, value)
}

/// Walks a dotted path, creating intermediate objects, and assigns the
/// value at the final segment. Numeric segments index arrays and must
/// be in bounds; object keys may be new.
fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    let (last, walk) = segments.split_last().expect("split yields at least one segment");
    let mut cur = root;
    for seg in walk {
        cur = descend(cur, seg, path)?;
    }
    if let Ok(idx) = last.parse::<usize>() {
        let slot = index_array(cur, idx, last, path)?;
        *slot = value;
    } else {
        let obj = expect_object(cur, last, path)?;
        obj.insert((*last).to_owned(), value);
    }
    Ok(())
}

fn descend<'a>(
    cur: &'a mut serde_json::Value,
    seg: &str,
    path: &str,
) -> Result<&'a mut serde_json::Value> {
    if let Ok(idx) = seg.parse::<usize>() {
        index_array(cur, idx, seg, path)
    } else {
        let obj = expect_object(cur, seg, path)?;
        Ok(obj
            .entry(seg.to_owned())
            .or_insert_with(|| serde_json::Value::Object(serde_json::Map::new())))
    }
}

fn index_array<'a>(
    cur: &'a mut serde_json::Value,
    idx: usize,
    seg: &str,
    path: &str,
) -> Result<&'a mut serde_json::Value> {
    let arr = cur.as_array_mut().ok_or_else(|| {
        Error::Config(format!("override path {path:?}: segment {seg:?} indexes a non-array"))
    })?;
    let len = arr.len();
    arr.get_mut(idx).ok_or_else(|| {
        Error::Config(format!(
            "override path {path:?}: index {idx} is out of bounds (array length {len})"
        ))
    })
}

fn expect_object<'a>(
    cur: &'a mut serde_json::Value,
    seg: &str,
    path: &str,
) -> Result<&'a mut serde_json::Map<String, serde_json::Value>> {
    cur.as_object_mut().ok_or_else(|| {
        Error::Config(format!("override path {path:?}: segment {seg:?} indexes a non-object"))
    })
}

/// Resolves and creates the output directory.
fn out_dir(args: &CommonArgs) -> Result<PathBuf> {
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => match std::env::var_os("MULTIRES_OUT") {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from("."),
        },
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn report_written(path: &Path) {
    println!("wrote {}", path.display());
}

fn series_over_r(label: &str, pairs: impl Iterator<Item = (usize, f64)>) -> Series {
    Series {
        label: label.to_owned(),
        points: pairs.map(|(r, v)| (r as f64, v)).collect(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveConfig {
    profile: BiasProfile,
    tau2: f64,
    n: usize,
    #[serde(default)]
    r_lo: usize,
    /// Defaults to n - 3, the last resolution with finite expectation.
    r_hi: Option<usize>,
    #[serde(default)]
    log_y: bool,
}

fn cmd_curve(args: &CommonArgs) -> Result<()> {
    let cfg: CurveConfig = load_config(args)?;
    let spec = LinearModelSpec { profile: cfg.profile, tau2: cfg.tau2, beta0: 0.0 };
    spec.validate()?;
    let r_hi = cfg.r_hi.unwrap_or_else(|| cfg.n.saturating_sub(3));
    if cfg.r_lo > r_hi {
        return Err(Error::Config(format!(
            "empty resolution range [{}, {r_hi}]",
            cfg.r_lo
        )));
    }
    let mut rows = Vec::with_capacity(r_hi - cfg.r_lo + 1);
    for r in cfg.r_lo..=r_hi {
        rows.push(PeExactRow {
            r,
            a_r: spec.profile.eval(r),
            eps_exact: linear::exact_eps(&spec, cfg.n, r)?,
            pe_exact: linear::exact_pe(&spec, cfg.n, r)?,
        });
    }
    let dir = out_dir(args)?;
    let csv_path = dir.join("pe_exact.csv");
    emit::write_pe_exact_csv(&csv_path, &rows)?;
    report_written(&csv_path);
    if args.svg {
        let series = vec![
            series_over_r("pe_exact", rows.iter().map(|w| (w.r, w.pe_exact))),
            series_over_r("eps_exact", rows.iter().map(|w| (w.r, w.eps_exact))),
            series_over_r("A_r", rows.iter().map(|w| (w.r, w.a_r))),
        ];
        let opts = ChartOptions {
            title: format!("linear prediction error, n = {}", cfg.n),
            log_y: cfg.log_y,
            ..ChartOptions::default()
        };
        let svg_path = dir.join("curve.svg");
        write_svg(&svg_path, &series, &opts)?;
        report_written(&svg_path);
    }
    Ok(())
}

fn cmd_simulate(args: &CommonArgs) -> Result<()> {
    if args.svg {
        return Err(Error::Config(
            "simulate writes aggregate tables only and has no chart; remove --svg".into(),
        ));
    }
    let cfg: ExperimentConfig = load_config(args)?;
    let report = harness::run_table_experiment(&cfg)?;
    let dir = out_dir(args)?;
    let csv_path = dir.join("table.csv");
    emit::write_table_csv(&csv_path, &report)?;
    report_written(&csv_path);
    let json_path = dir.join("table.json");
    emit::write_json(&json_path, &report)?;
    report_written(&json_path);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DescentConfig {
    profile: BiasProfile,
    tau2: f64,
    n: usize,
    #[serde(default)]
    log_y: bool,
}

fn cmd_descent(args: &CommonArgs) -> Result<()> {
    let cfg: DescentConfig = load_config(args)?;
    match cfg.profile.kind {
        ProfileKind::DoubleDescent { .. } | ProfileKind::MultiDescent { .. } => {}
        _ => {
            return Err(Error::Config(
                "descent expects a DoubleDescent or MultiDescent profile; use curve for \
                 monotone profiles"
                    .into(),
            ))
        }
    }
    let spec = LinearModelSpec { profile: cfg.profile, tau2: cfg.tau2, beta0: 0.0 };
    spec.validate()?;
    // Grid [1, n - 3]: r = 0 is a flat boundary point and everything
    // past n - 3 has no finite expectation.
    let r_hi = cfg.n.checked_sub(3).filter(|&h| h >= 1).ok_or_else(|| {
        Error::Config(format!("descent needs n >= 4 to cover r >= 1, got n={}", cfg.n))
    })?;
    let grid: Vec<usize> = (1..=r_hi).collect();
    let values = grid
        .iter()
        .map(|&r| linear::exact_pe(&spec, cfg.n, r))
        .collect::<Result<Vec<f64>>>()?;
    // The error diverges as r approaches n - 2 (the descent profiles
    // keep tau2 + A positive there), so the last feasible resolution
    // faces an infinite right neighbor. Without the sentinel the
    // deterministic second descent, which bottoms out exactly at the
    // domain edge, would go unflagged.
    let mut extended = values.clone();
    extended.push(f64::INFINITY);
    let flags = strict_local_minima(&extended);
    let rows: Vec<DescentRow> = grid
        .iter()
        .zip(values.iter().zip(flags.iter()))
        .map(|(&r, (&pe, &local_min))| DescentRow {
            r,
            a_r: spec.profile.eval(r),
            pe_exact: pe,
            local_min,
        })
        .collect();
    let dir = out_dir(args)?;
    let csv_path = dir.join("descent.csv");
    emit::write_descent_csv(&csv_path, &rows)?;
    report_written(&csv_path);
    if args.svg {
        let series = vec![
            series_over_r("pe_exact", rows.iter().map(|w| (w.r, w.pe_exact))),
            series_over_r("A_r", rows.iter().map(|w| (w.r, w.a_r))),
        ];
        let opts = ChartOptions {
            title: format!("descent structure, n = {}", cfg.n),
            log_y: cfg.log_y,
            ..ChartOptions::default()
        };
        let svg_path = dir.join("descent.svg");
        write_svg(&svg_path, &series, &opts)?;
        report_written(&svg_path);
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesConfig {
    profile: BiasProfile,
    error: ErrorModel,
    n_grid: Vec<u64>,
}

fn transformed_x(transform: &RateTransform, n: u64) -> f64 {
    match transform {
        RateTransform::LogLogLoss | RateTransform::ResolutionVsLogN => (n as f64).ln(),
        RateTransform::ResolutionFraction | RateTransform::LogLossVsN => n as f64,
    }
}

fn rate_axis_labels(transform: &RateTransform) -> (&'static str, &'static str) {
    match transform {
        RateTransform::LogLogLoss => ("log n", "log L_n"),
        RateTransform::ResolutionVsLogN => ("log n", "R_n"),
        RateTransform::ResolutionFraction => ("n", "R_n / n"),
        RateTransform::LogLossVsN => ("n", "log L_n"),
    }
}

fn cmd_rates(args: &CommonArgs) -> Result<()> {
    let cfg: RatesConfig = load_config(args)?;
    let report = rates::rate_probe(&cfg.profile, &cfg.error, &cfg.n_grid)?;
    let dir = out_dir(args)?;
    let csv_path = dir.join("rates.csv");
    emit::write_rates_csv(&csv_path, &report)?;
    report_written(&csv_path);
    let json_path = dir.join("rates.json");
    emit::write_json(&json_path, &report)?;
    report_written(&json_path);
    if args.svg {
        let mut pts = Vec::with_capacity(report.points.len());
        for p in &report.points {
            let x = transformed_x(&report.transform, p.n);
            let y = match report.transform {
                RateTransform::LogLogLoss | RateTransform::LogLossVsN => {
                    if p.l_n > 0.0 {
                        p.l_n.ln()
                    } else {
                        // Zero loss has no log; the fit region already
                        // excludes such points or rate_probe failed.
                        continue;
                    }
                }
                RateTransform::ResolutionVsLogN => p.r_n as f64,
                RateTransform::ResolutionFraction => p.r_n as f64 / p.n as f64,
            };
            pts.push((x, y));
        }
        let fitted = &report.points[report.fit_skip..];
        let x0 = transformed_x(&report.transform, fitted.first().expect("fit region nonempty").n);
        let x1 = transformed_x(&report.transform, fitted.last().expect("fit region nonempty").n);
        let series = vec![
            Series { label: "optima".into(), points: pts },
            Series {
                label: "fit".into(),
                points: vec![
                    (x0, report.slope * x0 + report.intercept),
                    (x1, report.slope * x1 + report.intercept),
                ],
            },
        ];
        let (x_label, y_label) = rate_axis_labels(&report.transform);
        let opts = ChartOptions {
            title: format!("rate fit: slope {:.4}, r2 {:.4}", report.slope, report.r2),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_y: false,
        };
        let svg_path = dir.join("rates.svg");
        write_svg(&svg_path, &series, &opts)?;
        report_written(&svg_path);
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OrderingConfig {
    profile: BiasProfile,
    perm: PermSpec,
    error: ErrorModel,
    n_grid: Vec<u64>,
}

fn cmd_ordering(args: &CommonArgs) -> Result<()> {
    let cfg: OrderingConfig = load_config(args)?;
    let report = ordering::ordering_experiment(&cfg.profile, &cfg.perm, &cfg.n_grid, &cfg.error)?;
    let dir = out_dir(args)?;
    let csv_path = dir.join("ordering.csv");
    emit::write_ordering_csv(&csv_path, &report)?;
    report_written(&csv_path);
    let ratio_path = dir.join("ordering_ratio.csv");
    emit::write_ordering_ratio_csv(&ratio_path, &report)?;
    report_written(&ratio_path);
    let json_path = dir.join("ordering.json");
    emit::write_json(&json_path, &report)?;
    report_written(&json_path);
    if args.svg {
        let series = vec![
            series_over_r("A_r", report.rows.iter().map(|w| (w.r, w.a_r))),
            series_over_r("A_prime_r", report.rows.iter().map(|w| (w.r, w.a_prime_r))),
        ];
        let opts = ChartOptions {
            title: "misordering distortion".into(),
            y_label: "bias".into(),
            ..ChartOptions::default()
        };
        let svg_path = dir.join("ordering.svg");
        write_svg(&svg_path, &series, &opts)?;
        report_written(&svg_path);
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeCurveConfig {
    profile: BiasProfile,
    #[serde(default = "default_m")]
    m: usize,
    tau2: f64,
    n: usize,
    r_max: usize,
    #[serde(default)]
    log_y: bool,
}

fn default_m() -> usize {
    2
}

fn cmd_tree_curve(args: &CommonArgs) -> Result<()> {
    let cfg: TreeCurveConfig = load_config(args)?;
    let spec = TreeModelSpec { m: cfg.m, profile: cfg.profile, tau2: cfg.tau2, beta0: 0.0 };
    let eps = tree::exact_eps_curve(&spec, cfg.n, cfg.r_max)?;
    // The upper bound is a tau2 = 0 statement; zeroing it here keeps
    // the per-resolution calls below from each printing a warning.
    let bound_spec = TreeModelSpec { tau2: 0.0, ..spec.clone() };
    if cfg.tau2 > 0.0 {
        eprintln!(
            "warning: eps_upper assumes tau2 = 0; the bound column ignores tau2 = {}",
            cfg.tau2
        );
    }
    let mut rows = Vec::with_capacity(cfg.r_max + 1);
    for r in 0..=cfg.r_max {
        rows.push(TreeCurveRow {
            r,
            eps_exact: eps[r],
            eps_upper: tree::eps_upper_bound(&bound_spec, cfg.n, r)?,
            a_r: spec.profile.eval(r),
        });
    }
    let dir = out_dir(args)?;
    let csv_path = dir.join("tree_curve.csv");
    emit::write_tree_curve_csv(&csv_path, &rows)?;
    report_written(&csv_path);
    if args.svg {
        let series = vec![
            series_over_r("eps_exact", rows.iter().map(|w| (w.r, w.eps_exact))),
            series_over_r("eps_upper", rows.iter().map(|w| (w.r, w.eps_upper))),
            series_over_r("A_r", rows.iter().map(|w| (w.r, w.a_r))),
        ];
        let opts = ChartOptions {
            title: format!("tree estimation error, n = {}, M = {}", cfg.n, cfg.m),
            log_y: cfg.log_y,
            ..ChartOptions::default()
        };
        let svg_path = dir.join("tree_curve.svg");
        write_svg(&svg_path, &series, &opts)?;
        report_written(&svg_path);
    }
    Ok(())
}

fn cmd_figure(args: &CommonArgs) -> Result<()> {
    let cfg: ExperimentConfig = load_config(args)?;
    let curves = harness::estimator_bias_curves(&cfg)?;
    let dir = out_dir(args)?;
    let csv_path = dir.join("figure.csv");
    emit::write_figure_csv(&csv_path, &curves)?;
    report_written(&csv_path);
    if args.svg {
        let series = vec![
            series_over_r("exact PE", curves.exact.iter()),
            series_over_r("CV mean", curves.cv.iter()),
            series_over_r("UE mean", curves.ue.iter()),
            series_over_r("IC mean", curves.ic.iter()),
        ];
        let opts = ChartOptions {
            title: format!("criterion means, n = {}, reps = {}", cfg.n, cfg.reps),
            ..ChartOptions::default()
        };
        let svg_path = dir.join("figure.svg");
        write_svg(&svg_path, &series, &opts)?;
        report_written(&svg_path);
    }
    Ok(())
}
