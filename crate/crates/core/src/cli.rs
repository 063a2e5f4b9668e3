//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime
//! error. Data goes to stdout (or `--out`), diagnostics to stderr.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::engine::{run, run_traced, MetricsRecord};
use crate::error::Error;
use crate::experiments::{
    alpha_grid, compare_strategies, comparison_csv, comparison_rows, meta_text, mean_reduction, sweep_alpha,
    write_with_meta, Experiment, SweepError, DEFAULT_Q_LIST, DEFAULT_RUNS,
};
use crate::scenarios::{listing, ScenarioKind, Settings};
use crate::topology::validate_topology;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hca-sim", version, about = "Hierarchical cellular automaton traffic signal simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and print its metrics as CSV.
    Run(RunArgs),
    /// Replicate the coordinated controller over a grid of alpha values.
    Sweep(SweepArgs),
    /// Compare back-pressure with the coordinated controller across demand levels.
    Compare(CompareArgs),
    /// Check a scenario's topology and list any violations.
    Validate(ScenarioArgs),
    /// Print a scenario's topology listing.
    Topology(ScenarioArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// grid, arterial, or file:PATH for a config file [default: grid]
    #[arg(long)]
    scenario: Option<String>,
    /// Random braking probability [default: 0.2]
    #[arg(long)]
    p: Option<f64>,
    /// Maximum speed in cells per step [default: 2]
    #[arg(long)]
    v_max: Option<u8>,
    /// Steps per run [default: 3600]
    #[arg(long)]
    steps: Option<u64>,
    /// Steps a phase is held before it may change [default: 0]
    #[arg(long)]
    min_green: Option<u32>,
    /// Count stops only in the last N cells of each lane [default: whole lane]
    #[arg(long)]
    delay_window: Option<usize>,
    /// Side-road arrival probability, arterial only [default: 0.02]
    #[arg(long)]
    side_q: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Arrival probability per step at each main entry [default: 0.1]
    #[arg(long)]
    q: Option<f64>,
    /// Coordination weight [default: 1.0 grid, 0.25 arterial]
    #[arg(long)]
    alpha: Option<f64>,
    /// hca, backpressure or fixed_time [default: hca]
    #[arg(long)]
    strategy: Option<String>,
    /// Seed of the run [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Write a per-step CSV trace to this file [default: none]
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also write the metrics CSV to this file [default: none]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// First alpha of the grid [default: 0]
    #[arg(long, default_value_t = 0.0)]
    alpha_from: f64,
    /// Last alpha of the grid [default: 2]
    #[arg(long, default_value_t = 2.0)]
    alpha_to: f64,
    /// Alpha increment [default: 0.1]
    #[arg(long, default_value_t = 0.1)]
    alpha_step: f64,
    /// Runs per alpha [default: 50]
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    /// Arrival probability per step at each main entry [default: 0.1]
    #[arg(long)]
    q: Option<f64>,
    /// Base seed; run r uses seed + r [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Write the CSV here, plus a .meta companion [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores [default: 0]
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated demand levels [default: 0.05,0.075,0.1,0.125,0.15]
    #[arg(long, value_delimiter = ',')]
    q_list: Option<Vec<f64>>,
    /// Runs per strategy and demand level [default: 50]
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    /// Coordination weight of the hca controller [default: 1.0 grid, 0.25 arterial]
    #[arg(long)]
    alpha: Option<f64>,
    /// Base seed; run r uses seed + r [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Write the CSV here, plus a .meta companion [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores [default: 0]
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => EXIT_USAGE,
        Error::Config(_) | Error::Parse { .. } | Error::Topology(_) => EXIT_CONFIG,
        Error::Invariant { .. } | Error::Io { .. } => EXIT_RUNTIME,
    }
}

impl ScenarioArgs {
    fn settings(&self) -> Result<Settings, Error> {
        let mut s = match self.scenario.as_deref() {
            None | Some("grid") => Settings::default(),
            Some("arterial") => Settings {
                scenario: ScenarioKind::Arterial,
                ..Settings::default()
            },
            Some(other) => match other.strip_prefix("file:") {
                Some(path) => Settings::load(path.as_ref())?,
                None => {
                    return Err(Error::Usage(format!(
                        "unknown scenario `{other}` (expected grid, arterial or file:PATH)"
                    )))
                }
            },
        };
        if let Some(p) = self.p {
            s.p = p;
        }
        if let Some(v) = self.v_max {
            s.v_max = v;
        }
        if let Some(steps) = self.steps {
            s.horizon = steps;
        }
        if let Some(m) = self.min_green {
            s.min_green = m;
        }
        if self.delay_window.is_some() {
            s.delay_window = self.delay_window;
        }
        if let Some(q) = self.side_q {
            s.side_q = q;
        }
        Ok(s)
    }
}

fn write_out(path: &std::path::Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<(), Error> {
    let mut settings = args.scenario.settings()?;
    if let Some(q) = args.q {
        settings.q = q;
    }
    if args.alpha.is_some() {
        settings.alpha = args.alpha;
    }
    if let Some(s) = &args.strategy {
        settings.strategy = s.clone();
    }
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }
    let config = settings.sim_config::<f64>()?;
    let metrics: MetricsRecord = match &args.trace {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
            run_traced(config, std::io::BufWriter::new(file))?
        }
        None => run(config)?,
    };
    let csv = format!("{}\n{}\n", MetricsRecord::CSV_HEADER, metrics.csv_row());
    if let Some(path) = &args.out {
        write_out(path, &csv)?;
    }
    stdout
        .write_all(csv.as_bytes())
        .map_err(|e| Error::io("writing stdout", e))
}

/// Writes `csv` to `out` (with meta) or stdout.
fn emit(
    csv: &str,
    out: &Option<PathBuf>,
    meta: impl FnOnce() -> String,
    stdout: &mut dyn Write,
) -> Result<(), Error> {
    match out {
        Some(path) => write_with_meta(path, csv, &meta()),
        None => stdout
            .write_all(csv.as_bytes())
            .map_err(|e| Error::io("writing stdout", e)),
    }
}

fn flush_partial(err: SweepError, csv: String, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Error {
    if !err.partial.rows.is_empty() {
        let _ = emit(&csv, out, || "partial=true\n".into(), stdout);
    }
    err.source
}

fn base_digest(settings: &Settings) -> Result<String, Error> {
    Ok(settings.sim_config::<f64>()?.digest())
}

fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Error> {
    let mut settings = args.scenario.settings()?;
    if let Some(q) = args.q {
        settings.q = q;
    }
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }
    settings.strategy = "hca".into();
    let digest = base_digest(&settings)?;
    let alphas = alpha_grid(args.alpha_from, args.alpha_to, args.alpha_step)?;
    let mut experiment = Experiment::<f64>::from_settings(&settings)?;
    experiment.jobs = args.jobs;
    let result = match sweep_alpha(&experiment, settings.q, &alphas, args.runs, settings.seed) {
        Ok(r) => r,
        Err(err) => {
            let csv = err.partial.to_csv();
            return Err(flush_partial(err, csv, &args.out, stdout));
        }
    };
    if let Some(best) = result
        .rows
        .iter()
        .min_by(|a, b| a.mean.total_cmp(&b.mean))
    {
        let _ = writeln!(stderr, "lowest mean delay {:.1} at alpha {:.2}", best.mean, best.alpha);
    }
    emit(
        &result.to_csv(),
        &args.out,
        || meta_text("sweep", &settings, &digest, args.runs, settings.seed),
        stdout,
    )
}

fn cmd_compare(args: &CompareArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Error> {
    let mut settings = args.scenario.settings()?;
    if args.alpha.is_some() {
        settings.alpha = args.alpha;
    }
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }
    settings.strategy = "hca".into();
    let q_list = args.q_list.clone().unwrap_or_else(|| DEFAULT_Q_LIST.to_vec());
    let digest = base_digest(&settings)?;
    let mut experiment = Experiment::<f64>::from_settings(&settings)?;
    experiment.jobs = args.jobs;
    let result = match compare_strategies(&experiment, &q_list, settings.alpha(), args.runs, settings.seed) {
        Ok(r) => r,
        Err(err) => {
            let csv = comparison_csv(&comparison_rows(&err.partial));
            return Err(flush_partial(err, csv, &args.out, stdout));
        }
    };
    let rows = comparison_rows(&result);
    let _ = writeln!(stderr, "mean reduction vs backpressure: {:.4}", mean_reduction(&rows));
    emit(
        &comparison_csv(&rows),
        &args.out,
        || meta_text("compare", &settings, &digest, args.runs, settings.seed),
        stdout,
    )
}

fn cmd_validate(args: &ScenarioArgs, stdout: &mut dyn Write) -> Result<(), Error> {
    let settings = args.scenario_settings_for_topology()?;
    let scenario = settings.build_scenario::<f64>()?;
    let report = validate_topology(&scenario.topology);
    if report.is_empty() {
        let _ = writeln!(
            stdout,
            "ok: {} lanes, {} intersections, {} entry points",
            scenario.topology.lanes().len(),
            scenario.topology.intersections().len(),
            scenario.topology.entry_points().len()
        );
        Ok(())
    } else {
        Err(Error::Topology(report))
    }
}

fn cmd_topology(args: &ScenarioArgs, stdout: &mut dyn Write) -> Result<(), Error> {
    let settings = args.scenario_settings_for_topology()?;
    let scenario = settings.build_scenario::<f64>()?;
    stdout
        .write_all(listing::export(&scenario.topology).as_bytes())
        .map_err(|e| Error::io("writing stdout", e))
}

impl ScenarioArgs {
    fn scenario_settings_for_topology(&self) -> Result<Settings, Error> {
        let settings = self.settings()?;
        settings.validate()?;
        Ok(settings)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let rendered = err.render().to_string();
            return if err.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args, stdout),
        Command::Sweep(args) => cmd_sweep(args, stdout, stderr),
        Command::Compare(args) => cmd_compare(args, stdout, stderr),
        Command::Validate(args) => cmd_validate(args, stdout),
        Command::Topology(args) => cmd_topology(args, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            exit_code(&err)
        }
    }
}
