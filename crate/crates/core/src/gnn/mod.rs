//! Shared-weight GCN stack with residual connection, mean readout,
//! cross-subgraph attention, classifier, and the triplet pretext loss.

mod attention;
mod ssl;
mod stack;

pub use attention::{attention_aggregate, overlap_mask, Attended};
pub use ssl::{ssl_choice, ssl_loss, ssl_sample, SslChoice, SslLossForm};
pub use stack::{
    classify, forward_stack, normalize_adjacency, readout, AttentionHead, GnnConfig, GnnStack,
    GraphInput, StackVars,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hetgraph::GraphError;
use crate::numcore::{NumError, Tape, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GnnError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("subgraph has no nodes")]
    EmptySubgraph,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("layer count {requested} outside 1..={max}")]
    LayerOutOfRange { requested: usize, max: usize },
    #[error("relevance mask of length {len} does not fit batch of {batch}")]
    MaskShape { batch: usize, len: usize },
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
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A subgraph embedding before and after attention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgraphEmbedding {
    pub target: usize,
    pub z_pre: Vec<f64>,
    pub z: Vec<f64>,
}

/// Tape handles for one forward pass over a batch of subgraphs.
#[derive(Clone, Debug)]
pub struct BatchForward {
    /// `B×h` readouts, one row per item.
    pub z_pre: Var,
    /// `B×h` attention outputs.
    pub z: Var,
    /// `B×1` classifier logits.
    pub logits: Var,
}

/// Embeds each `(input, depth)` item, attends across items whose subgraphs
/// overlap, and classifies.
pub fn forward_batch(
    tape: &mut Tape,
    vars: &StackVars,
    items: &[(&GraphInput, usize)],
    slope: f64,
) -> Result<BatchForward, GnnError> {
    if items.is_empty() {
        return Err(GnnError::EmptyBatch);
    }
    let mut rows = Vec::with_capacity(items.len());
    for &(input, l) in items {
        let h = forward_stack(tape, vars, input, l)?;
        rows.push(readout(tape, h)?);
    }
    let z_pre = tape.row_concat(&rows)?;
    let members: Vec<&[usize]> = items.iter().map(|(i, _)| i.members.as_slice()).collect();
    let mask = overlap_mask(&members);
    let attended = attention_aggregate(tape, vars, z_pre, &mask, slope)?;
    let logits = classify(tape, vars, attended.z)?;
    Ok(BatchForward {
        z_pre,
        z: attended.z,
        logits,
    })
}

/// Embedding of a subgraph that has no batch neighbors: attention over a
/// singleton reduces to the head-averaged projection `(1/K) Σ_k W^k z_pre`.
pub fn embed_single(
    tape: &mut Tape,
    vars: &StackVars,
    input: &GraphInput,
    l: usize,
    slope: f64,
) -> Result<Var, GnnError> {
    let h = forward_stack(tape, vars, input, l)?;
    let z_pre = readout(tape, h)?;
    Ok(attention_aggregate(tape, vars, z_pre, &[true], slope)?.z)
}

/// `Σ_i BCE(logit_i, y_i) + Σ ssl_terms + λ‖Θ‖₂`, where the norm runs over
/// every parameter in `params`.
pub fn total_loss(
    tape: &mut Tape,
    logits: Var,
    labels: &[f64],
    ssl_terms: &[Var],
    lambda: f64,
    params: &[Var],
) -> Result<Var, GnnError> {
    let mut loss = tape.bce_with_logits(logits, labels)?;
    for &s in ssl_terms {
        loss = tape.add(loss, s)?;
    }
    if lambda != 0.0 && !params.is_empty() {
        let mut sq = tape.sum_squares(params[0])?;
        for &p in &params[1..] {
            let s = tape.sum_squares(p)?;
            sq = tape.add(sq, s)?;
        }
        let norm = tape.sqrt(sq)?;
        let reg = tape.scale(norm, lambda)?;
        loss = tape.add(loss, reg)?;
    }
    Ok(loss)
}
