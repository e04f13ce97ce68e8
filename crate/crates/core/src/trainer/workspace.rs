use std::collections::HashMap;

use super::{TrainConfig, TrainError};
use crate::gnn::GraphInput;
use crate::hetgraph::{extract_subgraph, filter_by_metapaths, HetGraph, Subgraph};
use crate::rl::encode_state;

struct Prepared {
    sub: Subgraph,
    input: GraphInput,
}

/// A meta-path-filtered graph with every target's subgraph prepared at each
/// width up to a bound, plus each target's agent state.
///
/// Node indices refer to the filtered graph.
pub struct Workspace {
    graph: HetGraph,
    max_width: usize,
    position: HashMap<usize, usize>,
    prepared: Vec<Vec<Prepared>>,
    states: Vec<Vec<f64>>,
}

impl Workspace {
    /// Filters `g` by the configured meta-paths and prepares every target.
    pub fn new(g: &HetGraph, cfg: &TrainConfig) -> Result<Self, TrainError> {
        let paths = cfg.metapath_list();
        let graph = if paths.is_empty() {
            g.clone()
        } else {
            filter_by_metapaths(g, &paths)
        };
        Self::from_filtered(graph, cfg.max_width(), cfg.k_init)
    }

    /// Prepares an already filtered graph.
    pub fn from_filtered(graph: HetGraph, max_width: usize, k_init: usize) -> Result<Self, TrainError> {
        if max_width == 0 {
            return Err(TrainError::InvalidConfig("max width must be positive".into()));
        }
        let mut position = HashMap::new();
        let mut prepared = Vec::with_capacity(graph.targets().len());
        let mut states = Vec::with_capacity(graph.targets().len());
        for (i, &t) in graph.targets().iter().enumerate() {
            position.insert(t, i);
            let mut per_width = Vec::with_capacity(max_width);
            for k in 1..=max_width {
                let sub = extract_subgraph(&graph, t, k)?;
                let input = GraphInput::from_subgraph(&sub)?;
                per_width.push(Prepared { sub, input });
            }
            let state = if k_init <= max_width {
                encode_state(&per_width[k_init - 1].sub)?
            } else {
                encode_state(&extract_subgraph(&graph, t, k_init)?)?
            };
            states.push(state);
            prepared.push(per_width);
        }
        Ok(Self {
            graph,
            max_width,
            position,
            prepared,
            states,
        })
    }

    pub fn graph(&self) -> &HetGraph {
        &self.graph
    }

    pub fn max_width(&self) -> usize {
        self.max_width
    }

    fn entry(&self, target: usize, k: usize) -> Result<&Prepared, TrainError> {
        let pos = *self
            .position
            .get(&target)
            .ok_or_else(|| TrainError::InvalidConfig(format!("node {target} is not a target")))?;
        if k == 0 || k > self.max_width {
            return Err(TrainError::InvalidConfig(format!(
                "width {k} outside 1..={}",
                self.max_width
            )));
        }
        Ok(&self.prepared[pos][k - 1])
    }

    pub fn input(&self, target: usize, k: usize) -> Result<&GraphInput, TrainError> {
        Ok(&self.entry(target, k)?.input)
    }

    pub fn subgraph(&self, target: usize, k: usize) -> Result<&Subgraph, TrainError> {
        Ok(&self.entry(target, k)?.sub)
    }

    /// Agent state of a target: mean raw features of its initial subgraph.
    pub fn state(&self, target: usize) -> Result<&[f64], TrainError> {
        let pos = *self
            .position
            .get(&target)
            .ok_or_else(|| TrainError::InvalidConfig(format!("node {target} is not a target")))?;
        Ok(&self.states[pos])
    }

    /// Label of a target as `0.0` or `1.0`.
    pub fn label(&self, target: usize) -> Result<f64, TrainError> {
        self.graph
            .label(target)
            .map(f64::from)
            .ok_or_else(|| TrainError::InvalidConfig(format!("node {target} is unlabeled")))
    }
}
