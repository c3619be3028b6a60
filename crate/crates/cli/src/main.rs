use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use f2ddpg::harness::{cmd_eval, cmd_inspect, cmd_train, TrainArgs};

/// Friend-or-foe biased multi-agent DDPG experiments.
#[derive(Parser)]
#[command(name = "f2ddpg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a TOML config and write logs and checkpoints to DIR.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint (the replay buffer starts empty).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Greedy evaluation of a checkpoint; writes eval.csv to DIR.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a checkpoint's config, counters and parameter counts.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match Cli::parse().command {
        Command::Train { config, seed, out, resume } => cmd_train(&TrainArgs { config, seed, out, resume }).map(|o| {
            log::info!("trained {} episodes ({} updates), now at episode {}", o.episodes_run, o.updates, o.final_episode)
        }),
        Command::Eval { checkpoint, episodes, seed, out } => cmd_eval(&checkpoint, episodes, seed, &out).map(|r| {
            println!("mean return over {} episodes: {}", r.episodes(), r.mean_return());
            for (i, (m, s)) in r.mean.iter().zip(&r.std).enumerate() {
                println!("agent {i}: {m} +- {s}");
            }
        }),
        Command::Inspect { checkpoint } => cmd_inspect(&checkpoint).map(|s| print!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
