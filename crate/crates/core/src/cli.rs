//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage and config errors, 3 when a run
//! aborts (event ceiling) or its outputs cannot be written.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analytics::{
    hypoexp_halting_pdf, joint_density_r, joint_laplace_r, joint_moment, laplace_q, laplace_q_finite,
    laplace_qm_localized, last_step_pdf, mean_halting_finite, normalized_moment, scaled_halting_cdf,
    scaled_halting_pdf, scaled_moment, AnalyticsError, CumulantSolution,
};
use crate::experiments::{
    run_experiment, run_scaling_scan, Comparison, ComparisonLabel, ExperimentConfig, ExperimentError, ExperimentKind,
    ExperimentOutput, InitialCondition, Tolerance,
};
use crate::stats::{ks_one_sample, summarize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dsf", version, about = "Dynamic space filling: simulation and exact analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a halting, trace or density-decay experiment from a config file.
    Simulate(RunArgs),
    /// Run a size sweep and fit scaling exponents.
    Scan(RunArgs),
    /// Evaluate a closed-form quantity and print it as JSON.
    Analytic(AnalyticArgs),
    /// Compare halting times in a halting.csv with the scaled halting law.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyticFunction {
    /// Exact normalized moment mu_p (needs --p).
    Mu,
    /// Raw moment <tau^p> of the scaled halting time (needs --p).
    Moment,
    /// Scaled halting density (needs --tau).
    Pdf,
    /// Scaled halting CDF (needs --tau).
    Cdf,
    /// Laplace transform pi sqrt(s) / sinh(pi sqrt(s)) (needs --sigma).
    Laplace,
    /// Laplace transform of the scaled T - t_last density (needs --sigma).
    JointLaplace,
    /// Scaled density of T - t_last (needs --tau).
    JointDensity,
    /// <T t_last^p> / N^(p+1) in the scaling limit (needs --p).
    JointMoment,
    /// Exact finite mean halting time (needs --N, --m0).
    #[value(name = "mean-T")]
    MeanT,
    /// Exact finite halting-time transform (needs --s, --N, --m0).
    LaplaceFinite,
    /// Exact finite halting density, m0 <= 40 (needs --N, --m0, --t).
    HypoexpPdf,
    /// Transform of P_m(t) from the localized start (needs --s, --m, --N).
    LaplaceLocalized,
    /// Last-step density exp(-t/N)/N (needs --N, --t).
    LastStepPdf,
    /// Leading-order n(t), v(t), w(t) (needs --t; --initial selects the start).
    Cumulants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialArg {
    Uncorrelated,
    Localized,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[arg(value_enum)]
    pub function: AnalyticFunction,
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<f64>,
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum, default_value = "uncorrelated")]
    pub initial: InitialArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// A halting.csv written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Rate scale N (vertex count minus one).
    #[arg(long = "N")]
    pub n: f64,
    #[arg(long, default_value_t = 4)]
    pub p_max: u32,
    /// Also write the comparison to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn abort(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_ABORT,
            message: message.into(),
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Engine(_) | ExperimentError::Pool(_) => CliError::abort(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Scan(args) => cmd_scan(&args),
        Command::Analytic(args) => cmd_analytic(&args).map(|v| println!("{v}")),
        Command::Compare(args) => cmd_compare(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if let Some(workers) = args.workers {
        config.workers = Some(workers);
    }
    if let Some(replicas) = args.replicas {
        config.replicas = replicas;
    }
    Ok(config)
}

fn output_dir(args: &RunArgs, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::abort(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Floats in CSV output: 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::abort(format!("cannot write {}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::abort(format!("cannot write {}: {e}", path.display()));
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::abort(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::abort(format!("cannot write {}: {e}", path.display())))
}

fn write_halting_csv(path: &Path, output: &ExperimentOutput) -> Result<(), CliError> {
    write_rows(
        path,
        &["replica", "m0", "T", "t_last", "events", "seed"],
        output.halting.iter().map(|(i, s)| {
            vec![
                i.to_string(),
                s.m0.to_string(),
                format_float(s.halting_time),
                format_float(s.last_step),
                s.events.to_string(),
                s.seed.to_string(),
            ]
        }),
    )
}

fn write_trace_csv(path: &Path, output: &ExperimentOutput) -> Result<(), CliError> {
    let Some(table) = &output.traces else {
        return Ok(());
    };
    write_rows(
        path,
        &["replica", "t", "m"],
        table.rows.iter().flat_map(|(i, values)| {
            table
                .grid
                .iter()
                .zip(values)
                .map(move |(t, m)| vec![i.to_string(), format_float(*t), m.to_string()])
        }),
    )
}

fn report_summary(output: &ExperimentOutput, started: Instant) {
    let report = &output.report;
    eprintln!(
        "{} of {} replicas completed in {:.2} s",
        report.replicas_completed,
        report.replicas_requested,
        started.elapsed().as_secs_f64()
    );
    for c in &report.comparisons {
        let label = match c.label {
            ComparisonLabel::Conjectural => " [CONJECTURAL]",
            ComparisonLabel::Soft => " [soft]",
            ComparisonLabel::Exact => "",
        };
        let verdict = if c.passed { "ok" } else { "off" };
        eprintln!(
            "  {:<24} measured {:.6} expected {:.6} {verdict}{label}",
            c.observable, c.measured, c.expected
        );
    }
}

fn finish(output: &ExperimentOutput) -> Result<(), CliError> {
    match &output.report.failure {
        Some(note) => Err(CliError::abort(note.clone())),
        None => Ok(()),
    }
}

pub fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let config = load_config(args)?;
    if config.experiment == ExperimentKind::ScalingScan {
        return Err(CliError::usage("config describes a scaling scan; use `dsf scan`"));
    }
    config.validate()?;
    let dir = output_dir(args, &config)?;
    let started = Instant::now();
    let output = run_experiment(&config)?;
    if config.experiment == ExperimentKind::Halting {
        write_halting_csv(&dir.join("halting.csv"), &output)?;
    }
    write_trace_csv(&dir.join("trace.csv"), &output)?;
    write_json(&dir.join("report.json"), &output.report)?;
    report_summary(&output, started);
    finish(&output)
}

pub fn cmd_scan(args: &RunArgs) -> Result<(), CliError> {
    let mut config = load_config(args)?;
    if config.sweep.is_some() {
        config.experiment = ExperimentKind::ScalingScan;
    }
    if config.experiment != ExperimentKind::ScalingScan {
        return Err(CliError::usage("invalid config field `sweep`: a scan needs a size sweep"));
    }
    config.validate()?;
    let dir = output_dir(args, &config)?;
    let started = Instant::now();
    let output = run_scaling_scan(&config)?;
    write_rows(
        &dir.join("scaling.csv"),
        &["size", "mean_T", "se_T", "mean_tlast", "var_T"],
        output.report.scaling.iter().map(|r| {
            vec![
                r.vertices.to_string(),
                format_float(r.mean_t),
                format_float(r.se_t),
                format_float(r.mean_tlast),
                format_float(r.var_t),
            ]
        }),
    )?;
    write_json(&dir.join("report.json"), &output.report)?;
    report_summary(&output, started);
    finish(&output)
}

fn need<T: Copy>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing --{flag}")))
}

/// Evaluate the requested closed form.
pub fn cmd_analytic(args: &AnalyticArgs) -> Result<Value, CliError> {
    use AnalyticFunction::*;
    Ok(match args.function {
        Mu => serde_json::to_value(normalized_moment(need(args.p, "p")?)?).expect("moment serializes"),
        Moment => {
            let p = need(args.p, "p")?;
            json!({"p": p, "value": scaled_moment(p)?})
        }
        Pdf => {
            let tau = need(args.tau, "tau")?;
            json!({"tau": tau, "value": scaled_halting_pdf(tau)?})
        }
        Cdf => {
            let tau = need(args.tau, "tau")?;
            json!({"tau": tau, "value": scaled_halting_cdf(tau)?})
        }
        Laplace => {
            let sigma = need(args.sigma, "sigma")?;
            json!({"sigma": sigma, "value": laplace_q(sigma)?})
        }
        JointLaplace => {
            let sigma = need(args.sigma, "sigma")?;
            json!({"sigma": sigma, "value": joint_laplace_r(sigma)?})
        }
        JointDensity => {
            let tau = need(args.tau, "tau")?;
            json!({"tau": tau, "value": joint_density_r(tau)?})
        }
        JointMoment => {
            let p = need(args.p, "p")?;
            json!({"p": p, "value": joint_moment(p)})
        }
        MeanT => {
            let (n, m0) = (need(args.n, "N")?, need(args.m0, "m0")?);
            json!({"N": n, "m0": m0, "value": mean_halting_finite(n, m0)?})
        }
        LaplaceFinite => {
            let (s, n, m0) = (need(args.s, "s")?, need(args.n, "N")?, need(args.m0, "m0")?);
            json!({"s": s, "N": n, "m0": m0, "value": laplace_q_finite(s, n, m0)?})
        }
        HypoexpPdf => {
            let (n, m0, t) = (need(args.n, "N")?, need(args.m0, "m0")?, need(args.t, "t")?);
            json!({"N": n, "m0": m0, "T": t, "value": hypoexp_halting_pdf(n, m0, t)?})
        }
        LaplaceLocalized => {
            let (s, m, n) = (need(args.s, "s")?, need(args.m, "m")?, need(args.n, "N")?);
            if !(n >= 1.0 && n.fract() == 0.0) {
                return Err(CliError::usage("--N must be a positive integer here"));
            }
            json!({"s": s, "m": m, "N": n, "value": laplace_qm_localized(s, m, n as usize)?})
        }
        LastStepPdf => {
            let (n, t) = (need(args.n, "N")?, need(args.t, "t")?);
            json!({"N": n, "t": t, "value": last_step_pdf(n, t)?})
        }
        Cumulants => {
            let t = need(args.t, "t")?;
            if !(t >= 0.0) {
                return Err(CliError::usage("--t must be nonnegative"));
            }
            let (sol, initial) = match args.initial {
                InitialArg::Uncorrelated => (CumulantSolution::uncorrelated_binomial(), InitialCondition::Uncorrelated),
                InitialArg::Localized => (CumulantSolution::localized(), InitialCondition::Localized),
            };
            json!({"t": t, "initial": initial, "n": sol.n(t), "v": sol.v(t), "w": sol.w(t)})
        }
    })
}

#[derive(Debug, Serialize)]
struct CompareReport {
    input: String,
    samples: usize,
    rate_scale: f64,
    ks: crate::stats::KsResult,
    comparisons: Vec<Comparison>,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    if !(args.n > 0.0) {
        return Err(CliError::usage("--N must be positive"));
    }
    let mut reader = csv::Reader::from_path(&args.input)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.input.display())))?;
    let bad = |e: csv::Error| CliError::usage(format!("{}: {e}", args.input.display()));
    let headers = reader.headers().map_err(bad)?.clone();
    let column = headers
        .iter()
        .position(|h| h == "T")
        .ok_or_else(|| CliError::usage(format!("{} has no `T` column", args.input.display())))?;
    let mut tau = Vec::new();
    for record in reader.records() {
        let record = record.map_err(bad)?;
        let value: f64 = record[column]
            .parse()
            .map_err(|e| CliError::usage(format!("{}: bad T value {:?}: {e}", args.input.display(), &record[column])))?;
        tau.push(value / args.n);
    }
    if tau.len() < 3 {
        return Err(CliError::usage("need at least 3 halting times"));
    }
    let ks = ks_one_sample(&tau, |x| if x > 0.0 { scaled_halting_cdf(x).unwrap_or(1.0) } else { 0.0 })
        .map_err(|e| CliError::usage(e.to_string()))?;
    let summary = summarize(&tau, args.p_max.max(2)).map_err(|e| CliError::usage(e.to_string()))?;
    let mut comparisons = vec![Comparison::new(
        "mean_T_over_N",
        "large-N mean halting time pi^2/6",
        std::f64::consts::PI.powi(2) / 6.0,
        summary.mean,
        Some(summary.se_mean),
        Tolerance::Relative { value: 0.02 },
        ComparisonLabel::Exact,
    )];
    for p in 2..=args.p_max.max(2) {
        let exact = normalized_moment(p)?;
        comparisons.push(Comparison::new(
            format!("mu_{p}"),
            format!("normalized moment mu_{p} = {exact}"),
            exact.to_f64(),
            summary.normalized_moments[p as usize - 1],
            Some(summary.se_normalized_moments[p as usize - 1]),
            Tolerance::Relative { value: 0.05 * f64::from(p - 1) },
            ComparisonLabel::Exact,
        ));
    }
    let report = CompareReport {
        input: args.input.display().to_string(),
        samples: tau.len(),
        rate_scale: args.n,
        ks,
        comparisons,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    Ok(())
}
