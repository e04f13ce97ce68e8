//! Two independent DQN agents (subgraph width and GCN depth), with replay,
//! target networks, ε-greedy selection, the windowed accuracy reward, and
//! the nearest-neighbor value estimate.

mod agent;
mod config;
mod memory;
mod qnet;
mod reward;

pub use agent::{
    alpha_at, dqn_step, encode_state, mixed_target, select_action, Agent, AgentPair,
};
pub use config::{AgentConfig, RewardMeanForm};
pub use memory::{cosine_distance, nn_estimate, NnMemory, NnRecord, ReplayBuffer, Transition};
pub use qnet::{QNet, QNET_HIDDEN};
pub use reward::{binary_reward, reward_measure};

use thiserror::Error;

use crate::numcore::NumError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot encode an empty subgraph")]
    EmptySubgraph,
    #[error("replay batch is empty")]
    EmptyBatch,
    #[error("state has dimension {found}, network expects {expected}")]
    StateDim { expected: usize, found: usize },
    #[error("action {action} outside 0..{n_actions}")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ParamShape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error(transparent)]
    Num(#[from] NumError),
}
