//! Centralized-critic multi-agent DDPG with friend-or-foe action biasing.

mod bias;
mod learner;
mod team;
mod trainer;
mod update;

pub use bias::{
    bias_in_place, bias_joint_actions, BiasConfig, BiasStats, BiasVariant, BiasWorkspace, JointLayout,
};
pub use learner::{select_action, squash, AgentLearner};
pub use team::{Relation, TeamSpec};
pub use trainer::{
    train, AlgorithmConfig, Counters, EpisodeSummary, NoopObserver, RngSnapshot, RngStreams, StepRecord,
    TrainConfig, TrainObserver, Trainer, UpdateRecord,
};
pub use update::{actor_update, critic_target, critic_update, ActorUpdate, UpdateContext, UpdateWorkspace};

use thiserror::Error;

use crate::env::EnvError;
use crate::nn::NnError;
use crate::replay::ReplayError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarlError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("layout: {0}")]
    Layout(String),
    #[error("non-finite critic gradient in the block of agent {agent}")]
    NonFiniteGradient { agent: usize },
    #[error("non-finite critic loss for agent {agent}")]
    NonFiniteLoss { agent: usize },
    #[error("observer: {0}")]
    Observer(String),
}
