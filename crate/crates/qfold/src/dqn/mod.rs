//! Deep Q-learning agent: convolutional Q-network, experience replay,
//! target-network bootstrapping, and the per-target self-play loop.

mod network;
mod replay;
mod train;

pub use network::{
    q_backward, q_forward, sync_target, BatchItem, Gradients, QNetwork, Scalar, CONV_SPECS,
    DEFAULT_HIDDEN, PARAM_GROUPS,
};
pub use replay::{Experience, ReplayBuffer};
pub use train::{
    greedy_rollout, q_reference, select_action, train_self_play, EarlyStop, EpisodeRecord,
    Rollout, TraceStep, TrainConfig, TrainOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("observation size {0} below the minimum of 8")]
    BadObsSize(usize),
    #[error("observation is {got:?}, network expects {expected}x{expected}")]
    ObsShapeMismatch { expected: usize, got: (usize, usize) },
    #[error("action {action} out of range ({actions} actions)")]
    ActionOutOfRange { action: usize, actions: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("architecture mismatch: {0}")]
    BadArchitecture(String),
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("environment error: {0}")]
    Env(#[from] crate::environment::EnvError),
}
