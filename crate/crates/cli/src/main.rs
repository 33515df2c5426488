mod commands;
mod out_dir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "mapless", version, about = "Train and evaluate mapless motion planners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct OutArgs {
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// Allow writing into a non-empty output directory
    #[arg(long)]
    pub force: bool,
    /// Suppress progress output
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    /// TOML configuration; defaults apply to missing keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// World JSON (default: bundled env1)
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train steps (overrides run.total_train_steps)
    #[arg(long)]
    pub steps: Option<u64>,
    /// Interleave env and train steps on one thread
    #[arg(long, conflicts_with = "async_mode")]
    pub sync: bool,
    /// Collect samples on separate threads
    #[arg(long = "async")]
    pub async_mode: bool,
    /// Sampler threads in async mode
    #[arg(long)]
    pub samplers: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Agent checkpoint directory
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// World JSON (default: bundled 7x10 test world)
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Waypoint task JSON (default: bundled targets for the test world)
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Configuration used for sensing and episode limits; falls back to the
    /// config.toml next to the checkpoint, then to defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Number of seeds (at least 3)
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// First seed; the rest follow consecutively
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train steps per run
    #[arg(long, default_value_t = 60_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 1)]
    pub samplers: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct GpDemoArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// World JSON (default: bundled env1)
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Robot pose as x,y,theta; random free pose when omitted
    #[arg(long, value_parser = parse_pose)]
    pub pose: Option<[f64; 3]>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct LatencyArgs {
    /// Agent checkpoint; a freshly initialized 512x3 actor when omitted
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub queries: usize,
    /// Seconds for the control-frequency loop
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Train a navigation agent
    Train(TrainArgs),
    /// Run the waypoint evaluation of a checkpoint
    Eval(EvalArgs),
    /// Compare interleaved and threaded sample collection on the pendulum
    PendulumCompare(CompareArgs),
    /// Upsample a sparse scan to a dense one
    GpDemo(GpDemoArgs),
    /// Time actor queries
    Latency(LatencyArgs),
}

fn parse_pose(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [x, y, t] = parts[..] else {
        return Err("expected x,y,theta".into());
    };
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p}: {e}"));
    Ok([num(x)?, num(y)?, num(t)?])
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::PendulumCompare(a) => commands::pendulum_compare(a),
        Command::GpDemo(a) => commands::gp_demo(a),
        Command::Latency(a) => commands::latency(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
