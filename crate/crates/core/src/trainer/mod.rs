//! The search loop over per-target subgraph widths and GCN depths, final
//! retraining, evaluation, the layer probe, and embedding quality.

mod batch;
mod config;
mod log;
mod probe;
mod quality;
mod run;
mod workspace;

pub use batch::{embed_targets, evaluate, predict, train_step, Item};
pub use config::{TrainConfig, Variant};
pub use log::{EpochRecord, MetricRecord, MetricsLog, StepRecord};
pub use probe::{layer_probe, ProbeRow};
pub use quality::{embedding_quality, homogeneity, kmeans2};
pub use run::{
    accuracy, final_retrain, run_pipeline, run_training, EmbeddingBuffer, RunResult, Summary,
    TrainOutcome,
};
pub use workspace::Workspace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gnn::GnnError;
use crate::hetgraph::GraphError;
use crate::numcore::NumError;
use crate::rl::RlError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training is infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Independent random streams derived from one seed, so that gating one
/// component does not shift the draws of another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Stream {
    GnnInit = 1,
    AgentInit = 2,
    Explore = 3,
    Env = 4,
    Replay = 5,
    Ssl = 6,
    Retrain = 7,
    Probe = 8,
}

pub(crate) fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
