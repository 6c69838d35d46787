use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Learning-rate policy toolkit: evaluate schedules, train desk-scale tasks,
/// run range tests, tune, verify and manage the policy database.
#[derive(Debug, Parser, Serialize)]
#[command(name = "lrkit", version, propagate_version = true)]
pub struct Cli {
    /// Base random seed; multi-seed commands use seed, seed+1, ...
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Maximum number of trials run concurrently
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Policy database file (JSON lines)
    #[arg(long, global = true)]
    pub db: Option<PathBuf>,
    /// Output file; JSON results also get a CSV next to it where applicable
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Omit timestamps and wall-clock fields so outputs are byte-reproducible
    #[arg(long, global = true)]
    pub stable_output: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Tabulate a policy's learning rate as CSV (t,lr)
    Eval(EvalArgs),
    /// Train one trial and emit its record as JSON plus a CSV series
    Train(TrainArgs),
    /// Sweep fixed learning rates to bound the useful range
    RangeTest(RangeTestArgs),
    /// Search for a policy and emit a tuning report
    Tune(TuneArgs),
    /// Verify a policy against a target accuracy
    Verify(VerifyArgs),
    /// Emit the M-opt learning-rate estimate trace as CSV
    Mopt(MoptArgs),
    /// Inspect or move policy database records
    #[command(subcommand)]
    Db(DbCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Sgd,
    Momentum,
    Adam,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizerArgs {
    /// Optimizer
    #[arg(long, value_enum, default_value_t = OptimizerArg::Sgd)]
    pub optimizer: OptimizerArg,
    /// Momentum coefficient (momentum optimizer)
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// First-moment decay (adam)
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    /// Second-moment decay (adam)
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    /// Denominator offset (adam)
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Policy document (JSON file)
    #[arg(long)]
    pub policy: PathBuf,
    /// Number of iterations in the run
    #[arg(long)]
    pub iters: u64,
    /// Tabulate every this many iterations
    #[arg(long, default_value_t = 1)]
    pub stride: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Task spec, e.g. blobs2 or blobs2(n=1000,seed=3)
    #[arg(long)]
    pub task: String,
    /// Policy document (JSON file)
    #[arg(long)]
    pub policy: PathBuf,
    /// Training iterations
    #[arg(long)]
    pub iters: u64,
    /// Validation cadence in iterations [default: iters/100]
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct RangeTestArgs {
    /// Task spec
    #[arg(long)]
    pub task: String,
    /// Smallest learning rate of the grid
    #[arg(long, default_value_t = 1e-4)]
    pub lr_min: f64,
    /// Largest learning rate of the grid
    #[arg(long, default_value_t = 1.0)]
    pub lr_max: f64,
    /// Number of grid points
    #[arg(long, default_value_t = 9)]
    pub points: usize,
    /// Training lengths in epochs, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub budgets: Vec<u64>,
    /// Space the grid linearly instead of logarithmically
    #[arg(long)]
    pub linear: bool,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    Grid,
    Random,
    Plateau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorArg {
    TrainLoss,
    ValLoss,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    /// Task spec
    #[arg(long)]
    pub task: String,
    /// Search strategy
    #[arg(long, value_enum, default_value_t = StrategyArg::Grid)]
    pub strategy: StrategyArg,
    /// Training iterations per trial
    #[arg(long)]
    pub budget: u64,
    /// Policies rerun on every seed after the first pass
    #[arg(long, default_value_t = 3)]
    pub top: usize,
    /// Number of seeds (seed, seed+1, ...)
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    /// Lower end of the search range [default: from a range test]
    #[arg(long)]
    pub lr_min: Option<f64>,
    /// Upper end of the search range [default: from a range test]
    #[arg(long)]
    pub lr_max: Option<f64>,
    /// Grid points per rate axis
    #[arg(long, default_value_t = 4)]
    pub points: usize,
    /// Policy templates: fix, step, nstep, exp, inv, poly or a cyclic kind (tri, sin2, cosexp, ...)
    #[arg(long, value_delimiter = ',', default_value = "fix,tri")]
    pub templates: Vec<String>,
    /// Half-cycle length for cyclic templates [default: budget/8]
    #[arg(long)]
    pub cycle_len: Option<u64>,
    /// Candidates drawn by random search
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    /// Plateau candidate policy file, largest first; repeatable [default: three FIX rates over the range]
    #[arg(long = "candidate")]
    pub candidates: Vec<PathBuf>,
    /// Plateau start index, 0-based [default: middle candidate]
    #[arg(long)]
    pub start: Option<usize>,
    /// Plateau monitored loss
    #[arg(long, value_enum, default_value_t = MonitorArg::TrainLoss)]
    pub monitor: MonitorArg,
    /// Plateau patience in observations
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Plateau minimum loss improvement
    #[arg(long, default_value_t = 0.05)]
    pub min_delta: f64,
    /// Iterations before plateau actions are allowed
    #[arg(long, default_value_t = 0)]
    pub warmup: u64,
    /// Fraction of the budget after which plateaus decrease the rate
    #[arg(long, default_value_t = 0.7)]
    pub phase_split: f64,
    /// Ranking metric: peak_top1, final_loss or iters_to_target:<top1>
    #[arg(long, default_value = "peak_top1")]
    pub metric: String,
    /// Validation cadence in iterations [default: budget/100]
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Candidate policy document (JSON file)
    #[arg(long)]
    pub policy: PathBuf,
    /// Task spec
    #[arg(long)]
    pub task: String,
    /// Target top-1 accuracy in [0, 1]
    #[arg(long)]
    pub target_acc: f64,
    /// Database policies compared against the candidate
    #[arg(long, default_value_t = 3)]
    pub top: usize,
    /// Training iterations per trial
    #[arg(long)]
    pub budget: u64,
    /// Number of seeds (seed, seed+1, ...)
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    /// Validation cadence in iterations [default: budget/100]
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct MoptArgs {
    /// Task spec
    #[arg(long)]
    pub task: String,
    /// Policy document (JSON file)
    #[arg(long)]
    pub policy: PathBuf,
    /// Snapshot stride M in iterations
    #[arg(long = "M")]
    pub m: u64,
    /// Training iterations (at least 3M)
    #[arg(long)]
    pub iters: u64,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct KeyArgs {
    /// Dataset/task identifier of the key
    #[arg(long)]
    pub dataset: Option<String>,
    /// Model identifier of the key
    #[arg(long)]
    pub model: Option<String>,
    /// Optimizer identifier of the key, e.g. sgd or momentum(0.9)
    #[arg(long)]
    pub optimizer_id: Option<String>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum DbCommand {
    /// List stored records as a table
    List {
        #[command(flatten)]
        key: KeyArgs,
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Best policies under one key
    Top {
        #[command(flatten)]
        key: KeyArgs,
        /// Ranking metric: peak_top1, final_loss or iters_to_target:<top1>
        #[arg(long, default_value = "peak_top1")]
        metric: String,
        /// Number of policies
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Append the records of an exported file
    Import {
        /// Exported JSON-lines file
        file: PathBuf,
    },
    /// Write every record to a JSON-lines file
    Export {
        /// Destination file
        file: PathBuf,
    },
}
