//! `lleval`: command-line front end for the lifelong-learning metrics engine.
//!
//! Subcommands cover the full evaluation workflow: `validate` checks logs,
//! `metrics` computes per-run metrics, `aggregate` combines metrics files
//! across runs, `scenario` and `simulate` produce curricula and synthetic
//! logs, and `samplesize` / `cost` answer the two standalone design
//! questions.
//!
//! Exit codes: 0 on success, 1 for input errors (unreadable files, failed
//! validation, bad flags), 2 when the input was well formed but nothing
//! could be computed.

mod cmd_aggregate;
mod cmd_metrics;
mod cmd_sim;
mod cmd_validate;
mod config;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lleval_core::{cost_overhead, required_sample_size, TransferMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ratio,
    Contrast,
}

impl From<ModeArg> for TransferMode {
    fn from(m: ModeArg) -> TransferMode {
        match m {
            ModeArg::Ratio => TransferMode::Ratio,
            ModeArg::Contrast => TransferMode::Contrast,
        }
    }
}

/// Like `println!` but treats a closed stdout (downstream `head`, a broken
/// pipe) as a request to stop, not a panic.
#[macro_export]
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let mut stdout = std::io::stdout().lock();
        if writeln!(stdout, $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

/// `print!` counterpart of [`outln!`].
#[macro_export]
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let mut stdout = std::io::stdout().lock();
        if write!(stdout, $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

/// A command failure that already knows its exit code. `exit_code` 1 means
/// bad input, 2 means nothing was computable from well-formed input.
#[derive(Debug)]
pub struct Failure {
    pub exit_code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            exit_code: 1,
            message: message.into(),
        }
    }

    pub fn empty(message: impl Into<String>) -> Self {
        Failure {
            exit_code: 2,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::input(e.to_string())
    }
}

/// Commands return the exit code they want on success; reports that contain
/// validation errors still print normally and then exit 1.
pub type CmdResult = Result<u8, Failure>;

#[derive(Debug, Parser)]
#[command(
    name = "lleval",
    version,
    about = "Lifelong-learning metrics and evaluation harness"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct GlobalArgs {
    /// Output format for results on stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// TOML config with optional [preprocess], [scenario], and [agent] tables.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the config for scenario and simulate.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-run work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check experiment logs against the lifetime format rules.
    Validate {
        /// JSONL log files to check.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Compute lifelong-learning metrics for one or more run logs.
    Metrics {
        /// JSONL run logs, one lifetime each.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Measure to evaluate; required when runs carry several.
        #[arg(long)]
        measure: Option<String>,
        /// Transfer mode for FT and BT.
        #[arg(long, value_enum, default_value_t = ModeArg::Ratio)]
        mode: ModeArg,
        /// Directory of single-task-expert logs, one JSONL file per task.
        #[arg(long, value_name = "DIR")]
        ste_dir: Option<PathBuf>,
        /// Smoothing window override (odd, >= 1).
        #[arg(long)]
        window: Option<usize>,
        /// Score only the first (first task -> second task) pair in FT.
        #[arg(long)]
        ft_first_pair_only: bool,
        /// Emit a BT value at every qualifying block, not once per pair.
        #[arg(long)]
        bt_every_block: bool,
        /// Also compute the experimental performance-recovery slope.
        #[arg(long)]
        pr: bool,
        /// Relative drop that counts as a recovery event for PR.
        #[arg(long, default_value_t = 0.05)]
        pr_tolerance: f64,
        /// Write per-run CSV files of the processed learning curves here.
        #[arg(long, value_name = "DIR")]
        export_curves: Option<PathBuf>,
    },
    /// Combine per-run metrics JSON files into cross-run statistics.
    Aggregate {
        /// Metrics JSON files produced by `lleval metrics --format json`.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Threshold test to run on each metric's aggregates.
        #[arg(long, value_enum, default_value_t = TestArg::T)]
        test: TestArg,
        /// Significance level for the threshold tests.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Generate a syllabus from the [scenario] table of the config.
    Scenario {
        /// Write the expanded block plan as a JSONL file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Also derive per-lifetime seeds for this many lifetimes.
        #[arg(long)]
        lifetimes: Option<usize>,
    },
    /// Simulate synthetic lifetimes (and STE logs) for the configured
    /// scenario and agent.
    Simulate {
        /// Directory for run-NNN.jsonl files and the ste/ subdirectory.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Number of lifetimes to simulate.
        #[arg(long, default_value_t = 1)]
        lifetimes: usize,
    },
    /// Runs needed to detect an effect of k standard deviations.
    Samplesize {
        /// Effect size in standard deviations.
        #[arg(long)]
        k: f64,
        /// Type I error rate (two-sided).
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Type II error rate.
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
    },
    /// Per-experience wall-clock overhead of the LL system versus a
    /// single-task baseline.
    Cost {
        /// Wall-clock seconds for the lifelong run.
        ll_seconds: f64,
        /// Learning experiences in the lifelong run.
        ll_experiences: u64,
        /// Wall-clock seconds for the single-task baseline.
        single_seconds: f64,
        /// Learning experiences in the single-task baseline.
        single_experiences: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    T,
    Binomial,
}

fn main() -> ExitCode {
    // Usage errors are input errors (exit 1); only help and version exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let global = cli.global.clone();
    match cli.command {
        Command::Validate { paths } => cmd_validate::run(&global, &paths),
        Command::Metrics {
            paths,
            measure,
            mode,
            ste_dir,
            window,
            ft_first_pair_only,
            bt_every_block,
            pr,
            pr_tolerance,
            export_curves,
        } => cmd_metrics::run(
            &global,
            cmd_metrics::Options {
                paths,
                measure,
                mode: mode.into(),
                ste_dir,
                window,
                ft_first_pair_only,
                bt_every_block,
                pr,
                pr_tolerance,
                export_curves,
            },
        ),
        Command::Aggregate { paths, test, alpha } => {
            cmd_aggregate::run(&global, &paths, test, alpha)
        }
        Command::Scenario { out, lifetimes } => cmd_sim::scenario(&global, out, lifetimes),
        Command::Simulate { out_dir, lifetimes } => cmd_sim::simulate(&global, &out_dir, lifetimes),
        Command::Samplesize { k, alpha, beta } => samplesize(&global, k, alpha, beta),
        Command::Cost {
            ll_seconds,
            ll_experiences,
            single_seconds,
            single_experiences,
        } => cost(
            &global,
            ll_seconds,
            ll_experiences,
            single_seconds,
            single_experiences,
        ),
    }
}

fn samplesize(global: &GlobalArgs, k: f64, alpha: f64, beta: f64) -> CmdResult {
    if !(k.is_finite() && k > 0.0) {
        return Err(Failure::input("--k must be a positive finite number"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::input("--alpha must lie strictly between 0 and 1"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Failure::input("--beta must lie strictly between 0 and 1"));
    }
    let n = required_sample_size(k, alpha, beta);
    match global.format {
        OutputFormat::Text => outln!("{n}"),
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "k": k,
                "alpha": alpha,
                "beta": beta,
                "required_sample_size": n,
            });
            outln!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
    }
    Ok(0)
}

fn cost(
    global: &GlobalArgs,
    ll_seconds: f64,
    ll_experiences: u64,
    single_seconds: f64,
    single_experiences: u64,
) -> CmdResult {
    let overhead = cost_overhead(ll_seconds, ll_experiences, single_seconds, single_experiences)
        .map_err(|e| Failure::input(e.to_string()))?;
    match global.format {
        OutputFormat::Text => outln!("{overhead}"),
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "ll_seconds": ll_seconds,
                "ll_experiences": ll_experiences,
                "single_seconds": single_seconds,
                "single_experiences": single_experiences,
                "cost_overhead": overhead,
            });
            outln!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
    }
    Ok(0)
}
