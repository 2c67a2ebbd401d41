//! `nkscreen`: region preparation, data generation, training, certification
//! and benchmarks for N-k contingency screening.

mod commands;
mod exit;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "nkscreen", version, about = "Reliable N-k contingency screening with input-convex neural networks")]
struct Cli {
    /// Maximum number of worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root under which each run writes `<manifest hash>/`.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate contingencies, build and reduce the feasible region, and label samples.
    PrepareRegion(PrepareArgs),
    /// Draw a fresh labeled dataset in the coordinates of a region artifact.
    GenData(GenDataArgs),
    /// Train a classifier; ICNN checkpoints are written only when certified.
    Train(TrainArgs),
    /// Certify a checkpoint against a region.
    Certify(CertifyArgs),
    /// Time and score screening methods on a dataset split.
    Screen(ScreenArgs),
    /// Compare full and ICNN-constrained SC-OPF on a dataset split.
    ScopfBench(ScopfArgs),
}

#[derive(Args)]
pub struct PrepareArgs {
    /// Case file (JSON) or the built-in name `ieee39`.
    #[arg(long, default_value = "ieee39")]
    pub case: String,
    /// Preparation config (JSON, see README); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Maximum number of simultaneous line outages.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    /// Redundancy elimination strategy: `box` or `lp`.
    #[arg(long)]
    pub redundancy: Option<String>,
}

#[derive(Args)]
pub struct GenDataArgs {
    #[arg(long, default_value = "ieee39")]
    pub case: String,
    /// Region artifact written by prepare-region.
    #[arg(long)]
    pub region: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub train: usize,
    #[arg(long, default_value_t = 0)]
    pub val: usize,
    #[arg(long, default_value_t = 2000)]
    pub test: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub region: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Training config (JSON, see README); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `icnn` (certified) or `mlp` (nonconvex baseline).
    #[arg(long, default_value = "icnn")]
    pub model: String,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub pos_weight: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub warm_epochs: Option<usize>,
    #[arg(long)]
    pub scaling_epochs: Option<usize>,
    /// Print a progress line every this many epochs (0 disables).
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
}

#[derive(Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub region: PathBuf,
}

#[derive(Args)]
pub struct ScreenArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub region: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Optional nonconvex baseline written by `train --model mlp`.
    #[arg(long)]
    pub mlp: Option<PathBuf>,
    /// `train`, `val` or `test`.
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Args)]
pub struct ScopfArgs {
    /// One or more checkpoints; summaries report mean and standard deviation across them.
    #[arg(long, required = true, num_args = 1..)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub region: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "ieee39")]
    pub case: String,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Use only the first N instances of the split.
    #[arg(long)]
    pub limit: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(exit::INPUT_INVALID);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(exit::RUNTIME_FAILURE);
        }
    }
    let result = match &cli.command {
        Command::PrepareRegion(a) => commands::prepare_region(&cli.out, a),
        Command::GenData(a) => commands::gen_data(&cli.out, a),
        Command::Train(a) => commands::train(&cli.out, a),
        Command::Certify(a) => commands::certify(&cli.out, a),
        Command::Screen(a) => commands::screen(&cli.out, a),
        Command::ScopfBench(a) => commands::scopf_bench(&cli.out, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e))
        }
    }
}
