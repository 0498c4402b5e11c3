//! Command-line front end: `sim run`, `sim experiment`, `sim plot`.
//!
//! Exit codes: 0 success, 1 the run or an experiment check failed,
//! 2 usage, configuration or I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cosim::{Outcome, Trace, TraceRecord};
use crate::metrics::{cycle_kpis, emit_csv, emit_svg, read_csv, MetricsError, PlotSpec, Series};
use crate::scenario::{parse_config, run_experiment, Experiment, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sim", version, about = "Short loading cycle simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one cycle and write trace, plots and KPIs.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run an adaptation experiment pair and compare.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Redraw the plots of an existing trace.csv.
    Plot {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunOpts {
    /// Output directory (overrides sim.out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step size in seconds (overrides sim.dt).
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time limit in seconds (overrides sim.t_max).
    #[arg(long = "t-max")]
    t_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentName {
    Layout,
    Lift,
    Bucketheight,
}

impl From<ExperimentName> for Experiment {
    fn from(n: ExperimentName) -> Self {
        match n {
            ExperimentName::Layout => Experiment::Layout,
            ExperimentName::Lift => Experiment::Lift,
            ExperimentName::Bucketheight => Experiment::BucketHeight,
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::usage(e.to_string())
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(stdout, "{}", e.render());
                return EXIT_OK;
            }
            let _ = write!(stderr, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Run { config, opts } => cmd_run(&config, &opts, stdout),
        Command::Experiment { name, config, opts } => cmd_experiment(name.into(), &config, &opts, stdout),
        Command::Plot { trace, out } => cmd_plot(&trace, out.as_deref(), stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: &Path, opts: &RunOpts) -> Result<ScenarioConfig, Failure> {
    let text = fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if let Some(dt) = opts.dt {
        cfg.dt = dt;
    }
    if let Some(t_max) = opts.t_max {
        cfg.t_max = t_max;
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn harmony_spec() -> PlotSpec {
    PlotSpec::new("Machine harmony", "travelled distance [m]", "bucket height [m]")
}

fn bucket_spec() -> PlotSpec {
    PlotSpec::new(
        "Bucket height over bucket angle",
        "bucket angle [rad]",
        "bucket height [m]",
    )
}

fn location_spec() -> PlotSpec {
    let mut spec = PlotSpec::new("Machine location", "x [m]", "z [m]");
    spec.equal_aspect = true;
    spec
}

fn project(records: &[TraceRecord], f: impl Fn(&TraceRecord) -> (f64, f64)) -> Vec<(f64, f64)> {
    records.iter().map(f).collect()
}

fn harmony(r: &TraceRecord) -> (f64, f64) {
    (r.s_cum, r.fb.h)
}

fn bucket(r: &TraceRecord) -> (f64, f64) {
    (r.fb.phi, r.fb.h)
}

fn location(r: &TraceRecord) -> (f64, f64) {
    (r.fb.pose.x, r.fb.pose.z)
}

fn write_plots(records: &[TraceRecord], label: &str, dir: &Path) -> Result<(), Failure> {
    emit_svg(
        &harmony_spec(),
        &[Series::new(label, project(records, harmony))],
        &dir.join("harmony.svg"),
    )?;
    emit_svg(
        &bucket_spec(),
        &[Series::new(label, project(records, bucket))],
        &dir.join("bucket.svg"),
    )?;
    emit_svg(
        &location_spec(),
        &[Series::new(label, project(records, location))],
        &dir.join("location.svg"),
    )?;
    Ok(())
}

fn outcome_text(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Done => "done".to_string(),
        Outcome::Timeout => "timeout".to_string(),
        Outcome::Failed(e) => format!("failed: {e}"),
    }
}

fn write_run(cfg: &ScenarioConfig, trace: &Trace, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    emit_csv(trace, &dir.join("trace.csv"))?;
    write_plots(&trace.records, &cfg.name, dir)?;
    let mut text = format!(
        "scenario={}\noutcome={}\nconfig_digest={}\n",
        cfg.name,
        outcome_text(&trace.outcome),
        trace.meta.config_digest
    );
    if let Ok(k) = cycle_kpis(trace) {
        text.push_str(&k.to_text());
    }
    fs::write(dir.join("kpis.txt"), text)?;
    Ok(())
}

fn cmd_run(config: &Path, opts: &RunOpts, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = load_config(config, opts)?;
    let trace = cfg.run().map_err(|e| Failure::usage(e.to_string()))?;
    let dir = out_dir(&cfg);
    write_run(&cfg, &trace, &dir)?;
    let _ = writeln!(
        stdout,
        "{}: {} after {} records, output in {}",
        cfg.name,
        outcome_text(&trace.outcome),
        trace.len(),
        dir.display()
    );
    Ok(if trace.is_done() { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_experiment(
    experiment: Experiment,
    config: &Path,
    opts: &RunOpts,
    stdout: &mut dyn Write,
) -> Result<i32, Failure> {
    let base = load_config(config, opts)?;
    let report = run_experiment(experiment, &base).map_err(|e| Failure::usage(e.to_string()))?;
    let dir = out_dir(&base).join(experiment.name());
    fs::create_dir_all(&dir)?;
    for case in &report.cases {
        write_run(&case.config, &case.trace, &dir.join(&case.config.name))?;
    }
    let overlay = |f: fn(&TraceRecord) -> (f64, f64)| -> Vec<Series> {
        report
            .cases
            .iter()
            .map(|c| Series::new(c.config.name.clone(), project(&c.trace.records, f)))
            .collect()
    };
    emit_svg(&harmony_spec(), &overlay(harmony), &dir.join("harmony.svg"))?;
    emit_svg(&location_spec(), &overlay(location), &dir.join("location.svg"))?;
    let table = report.table();
    fs::write(dir.join("comparison.txt"), &table)?;
    let _ = write!(stdout, "{table}");
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_plot(trace: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let file = fs::File::open(trace).map_err(|e| Failure::usage(format!("{}: {e}", trace.display())))?;
    let records = read_csv(std::io::BufReader::new(file))?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => trace.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    fs::create_dir_all(&dir)?;
    let label = trace.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    write_plots(&records, label, &dir)?;
    let _ = writeln!(stdout, "{} records plotted into {}", records.len(), dir.display());
    Ok(EXIT_OK)
}
