//! Per-target reinforced search of subgraph width and GCN depth for social
//! bot detection on heterogeneous graphs.
//!
//! The crate is organized bottom-up:
//!
//! - [`hetgraph`]: typed graph storage, meta-path filtering, k-hop subgraphs,
//!   and the reachability-based jump distribution between target users.
//! - [`synthgen`]: seeded synthetic social graphs with planted bots.
//! - [`numcore`]: dense `f64` matrices, a reverse-mode tape, and Adam.
//! - [`gnn`]: the shared GCN layer pool, readout, cross-subgraph attention,
//!   classifier, and the triplet pretext loss.
//! - [`rl`]: the two DQN agents, rewards, and nearest-neighbor value estimates.
//! - [`trainer`]: the search loop, final retraining, evaluation, and probes.

pub mod gnn;
pub mod hetgraph;
pub mod numcore;
pub mod rl;
pub mod synthgen;
pub mod trainer;
