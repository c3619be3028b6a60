//! Experiment front door: run configuration, binary checkpoints and the
//! `train` / `eval` / `inspect` commands.

mod checkpoint;
mod commands;
mod config;

pub use checkpoint::{decode_checkpoint, load_checkpoint, AnyCheckpoint, Checkpoint, MAGIC, VERSION};
pub use commands::{
    cmd_eval, cmd_inspect, cmd_train, TrainArgs, TrainOutcome, ALIGNMENT_FILE, CHECKPOINT_FILE, CONFIG_FILE,
    DIAGNOSTICS_FILE, EVAL_FILE, EVAL_PROGRESS_FILE, REWARDS_FILE, TRACE_FILE,
};
pub use config::{parse_config, LogConfig, Precision, RunConfig};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::env::EnvError;
use crate::marl::MarlError;
use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic string)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Marl(#[from] MarlError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        Self::Config(e.to_string())
    }
}
