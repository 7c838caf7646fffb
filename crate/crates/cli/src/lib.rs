//! Command-line driver: argument parsing, experiment orchestration,
//! artifact writing and threshold checks.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nalu_core::layers::{gradient_suite, SuiteEntry, GRADIENT_TOLERANCE};
use nalu_core::reporting::{export_curves, render_report};
use nalu_core::tasks::ArithmeticOp;
use nalu_core::training::{
    read_results_csv, run_experiment_grid, write_results_csv, write_results_jsonl, Experiment, GridSpec, RunResult,
    TrainError,
};

pub mod checks;

pub use checks::{evaluate_checks, CheckOutcome};

pub const OUT_ENV: &str = "NALU_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nalu", version, about = "Arithmetic extrapolation experiments for NAC and NALU layers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Autoencode scalars through 3x8 MLPs, one sweep per activation.
    Identity(GridArgs),
    /// Static arithmetic over a 100-wide input vector.
    Static(GridArgs),
    /// Recurrent arithmetic: train at T=10, extrapolate to T=1000.
    Recurrent(GridArgs),
    /// Number phrases to scalars with model selection on validation loss.
    Language(GridArgs),
    /// Finite-difference gradient checks for every layer and cell.
    Gradcheck(GradArgs),
    /// Re-render stored result CSVs.
    Table(TableArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training steps per run (before quick scaling).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Model tags, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Operations, comma separated (add,sub,mul,div,square,sqrt).
    #[arg(long, value_delimiter = ',')]
    pub ops: Option<Vec<String>>,
    /// Output directory.
    #[arg(long, env = OUT_ENV, default_value = "results")]
    pub out: PathBuf,
    /// Divide steps and model counts by N.
    #[arg(long)]
    pub quick: Option<usize>,
    /// Seeds per (model, op) cell.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Evaluate acceptance thresholds; exit 1 if any fails.
    #[arg(long)]
    pub check: bool,
    /// Identity experiment: models per activation.
    #[arg(long = "models-count")]
    pub models_count: Option<usize>,
    /// Language experiment: initialisations per configuration.
    #[arg(long)]
    pub inits: Option<usize>,
    #[arg(long = "learning-rate")]
    pub learning_rate: Option<f64>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Worker threads for grid cells.
    #[arg(long)]
    pub workers: Option<usize>,
    /// TOML grid description; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Keep per-run wall times in the result files.
    #[arg(long = "wall-time")]
    pub wall_time: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GradArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per layer.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, env = OUT_ENV, default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    /// Result CSV files written by a grid command.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::ChecksFailed { .. } => EXIT_CHECK_FAILED,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Runtime(_) => "runtime",
            CliError::ChecksFailed { .. } => "check_failed",
        }
    }

    /// One-line JSON report for stderr.
    pub fn report(&self) -> String {
        serde_json::json!({
            "status": "error",
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(m) | TrainError::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Merges the config file (if any) and the flags into one grid.
pub fn grid_spec(experiment: Experiment, args: &GridArgs) -> Result<GridSpec, CliError> {
    let mut grid = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let raw: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config: {e}")))?;
            if let Some(declared) = raw.get("experiment").and_then(|v| v.as_str()) {
                if declared.parse::<Experiment>().ok() != Some(experiment) {
                    return Err(CliError::Usage(format!(
                        "config declares experiment `{declared}` but the command is `{experiment}`"
                    )));
                }
            }
            GridSpec::from_toml_str(&text)?
        }
        None => GridSpec::new(experiment),
    };
    grid.experiment = experiment;
    if let Some(v) = args.seed {
        grid.seed = v;
    }
    if let Some(v) = args.steps {
        if v == 0 {
            return Err(CliError::Usage("--steps must be positive".into()));
        }
        grid.steps = Some(v);
    }
    if let Some(v) = &args.models {
        grid.models = v.clone();
    }
    if let Some(v) = &args.ops {
        if matches!(experiment, Experiment::Identity | Experiment::Language) {
            return Err(CliError::Usage(format!("--ops does not apply to the {experiment} experiment")));
        }
        grid.ops = v
            .iter()
            .map(|s| s.parse::<ArithmeticOp>().map_err(CliError::Usage))
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = args.quick {
        grid.quick = v;
    }
    if let Some(v) = args.seeds {
        grid.seeds = v;
    }
    if let Some(v) = args.models_count {
        if experiment != Experiment::Identity {
            return Err(CliError::Usage("--models-count only applies to the identity experiment".into()));
        }
        grid.model_count = v;
    }
    if let Some(v) = args.inits {
        if experiment != Experiment::Language {
            return Err(CliError::Usage("--inits only applies to the language experiment".into()));
        }
        grid.inits = v;
    }
    if let Some(v) = args.learning_rate {
        grid.learning_rate = Some(v);
    }
    if let Some(v) = args.batch_size {
        if v == 0 {
            return Err(CliError::Usage("--batch-size must be positive".into()));
        }
        grid.batch_size = Some(v);
    }
    if let Some(v) = args.workers {
        grid.workers = v;
    }
    grid.validate()?;
    Ok(grid)
}

fn write_results(path: &Path, results: &[RunResult]) -> Result<(), CliError> {
    let file = BufWriter::new(File::create(path)?);
    write_results_csv(file, results, true)?;
    Ok(())
}

fn write_jsonl(path: &Path, results: &[RunResult]) -> Result<(), CliError> {
    let mut file = BufWriter::new(File::create(path)?);
    write_results_jsonl(&mut file, results)?;
    file.flush()?;
    Ok(())
}

fn strip_wall_time(results: &mut [RunResult]) {
    for r in results {
        r.wall_ms = None;
    }
}

#[derive(Debug, Serialize)]
struct CheckReport<'a> {
    experiment: String,
    passed: bool,
    checks: &'a [CheckOutcome],
}

/// Runs one experiment grid and writes every artifact under
/// `<out>/<experiment>/`. Returns the text that is printed.
pub fn run_grid(experiment: Experiment, args: &GridArgs) -> Result<String, CliError> {
    let grid = grid_spec(experiment, args)?;
    let dir = args.out.join(experiment.name());
    fs::create_dir_all(&dir)?;
    let mut output = run_experiment_grid(&grid)?;
    if !args.wall_time {
        strip_wall_time(&mut output.results);
        strip_wall_time(&mut output.candidates);
    }
    let effective = toml::to_string(&grid).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(dir.join("grid.toml"), effective)?;
    write_results(&dir.join("results.csv"), &output.results)?;
    write_jsonl(&dir.join("results.jsonl"), &output.results)?;
    if experiment == Experiment::Language {
        write_results(&dir.join("candidates.csv"), &output.candidates)?;
    }
    export_curves(&output.curves, &dir.join("curves"))?;

    let mut text = render_report(&output.results);
    fs::write(dir.join("table.txt"), &text)?;

    if args.check {
        let outcomes = evaluate_checks(experiment, &output.results);
        let passed = outcomes.iter().all(|c| c.passed);
        let report = CheckReport {
            experiment: experiment.name().into(),
            passed,
            checks: &outcomes,
        };
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(dir.join("checks.json"), json + "\n")?;
        text.push('\n');
        for c in &outcomes {
            text.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        if outcomes.is_empty() {
            text.push_str("no thresholds apply to the selected models and operations\n");
        }
        let failed = outcomes.iter().filter(|c| !c.passed).count();
        if failed > 0 {
            print!("{text}");
            return Err(CliError::ChecksFailed {
                failed,
                total: outcomes.len(),
            });
        }
    }
    Ok(text)
}

pub fn run_gradcheck(args: &GradArgs) -> Result<String, CliError> {
    if args.instances == 0 {
        return Err(CliError::Usage("--instances must be positive".into()));
    }
    let entries: Vec<SuiteEntry> = gradient_suite(args.seed, args.instances);
    let dir = args.out.join("gradcheck");
    fs::create_dir_all(&dir)?;
    let json = serde_json::to_string_pretty(&entries).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(dir.join("gradcheck.json"), json + "\n")?;
    let width = entries.iter().map(|e| e.layer.len()).max().unwrap_or(5);
    let mut text = String::new();
    for e in &entries {
        text.push_str(&format!(
            "{} {:<width$}  max rel error {:.3e} over {} instances{}\n",
            if e.passed { "PASS" } else { "FAIL" },
            e.layer,
            e.max_rel_error,
            e.instances,
            if e.errors > 0 { format!(", {} not evaluable", e.errors) } else { String::new() }
        ));
    }
    let failed = entries.iter().filter(|e| !e.passed).count();
    text.push_str(&format!(
        "{} of {} layers within {GRADIENT_TOLERANCE:e}\n",
        entries.len() - failed,
        entries.len()
    ));
    if failed > 0 {
        print!("{text}");
        return Err(CliError::ChecksFailed {
            failed,
            total: entries.len(),
        });
    }
    Ok(text)
}

pub fn run_table(args: &TableArgs) -> Result<String, CliError> {
    let mut results = Vec::new();
    for path in &args.files {
        let file = File::open(path).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
        results.extend(read_results_csv(file)?);
    }
    if results.is_empty() {
        return Err(CliError::Usage("the result files contain no rows".into()));
    }
    Ok(render_report(&results))
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Identity(a) => run_grid(Experiment::Identity, a),
        Command::Static(a) => run_grid(Experiment::Static, a),
        Command::Recurrent(a) => run_grid(Experiment::Recurrent, a),
        Command::Language(a) => run_grid(Experiment::Language, a),
        Command::Gradcheck(a) => run_gradcheck(a),
        Command::Table(a) => run_table(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                // --help / --version
                let _ = e.print();
                return EXIT_OK;
            }
            let _ = e.print();
            eprintln!("{}", CliError::Usage(e.kind().to_string()).report());
            return EXIT_USAGE;
        }
    };
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}
