use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reqadapt::milp::AdaptMode;
use reqadapt::uuv::Policy;

/// Requirement adaptation for cyber-physical systems: monitor STL traces,
/// solve single adaptation problems, and run the UUV mission simulator.
///
/// Exit codes: 0 success or SAT, 1 UNSAT or no feasible adaptation,
/// 2 usage, input or undefined-robustness errors.
#[derive(Debug, Parser)]
#[command(name = "reqadapt", version)]
pub struct Cli {
    /// Print one JSON object on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Progress on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robustness of an STL formula on a CSV trace.
    Monitor(MonitorArgs),
    /// One degradation, recovery or replanning problem.
    Solve(SolveArgs),
    /// One UUV mission per policy.
    Simulate(SimulateArgs),
    /// UUV missions over a range of seeds, with summary CSVs.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// CSV with a `time` column and one column per variable.
    #[arg(long)]
    pub trace: PathBuf,
    /// STL formula, e.g. `G[0,1](thrust > 100)`.
    #[arg(long)]
    pub formula: String,
    /// Evaluation time in seconds from the start of the trace.
    #[arg(long, default_value_t = 0.0)]
    pub time: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Degrade,
    Recover,
    Replan,
}

impl From<ModeArg> for AdaptMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Degrade => AdaptMode::Degrade,
            ModeArg::Recover => AdaptMode::Recover,
            ModeArg::Replan => AdaptMode::Replan,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BudgetArgs {
    /// Wall-clock limit per adaptation solve.
    #[arg(long, env = "REQADAPT_BUDGET_MS")]
    pub budget_ms: Option<u64>,
    /// Branch-and-bound node limit per adaptation solve.
    #[arg(long)]
    pub max_nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Requirement space JSON.
    #[arg(long)]
    pub space: PathBuf,
    /// Transition system JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Observed trace; its last sample is the current state.
    #[arg(long)]
    pub trace: PathBuf,
    /// Environment action applied at the start of the first step; repeatable.
    #[arg(long = "event")]
    pub events: Vec<String>,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Directory for `problem.lp` and `report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Adaptive,
    Baseline,
    Both,
}

impl PolicyArg {
    pub fn policies(self) -> Vec<Policy> {
        match self {
            PolicyArg::Adaptive => vec![Policy::Adaptive],
            PolicyArg::Baseline => vec![Policy::Baseline],
            PolicyArg::Both => vec![Policy::Adaptive, Policy::Baseline],
        }
    }
}

#[derive(Debug, Args)]
pub struct SimOptions {
    #[arg(long, value_enum, default_value = "both")]
    pub policy: PolicyArg,
    /// JSON file whose fields replace the generated scenario's.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave solve-time columns blank so repeated runs give identical files.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub opts: SimOptions,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Runs seeds `1..=N`.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// Also write traces and adaptation logs for every episode.
    #[arg(long)]
    pub traces: bool,
    #[command(flatten)]
    pub opts: SimOptions,
}
