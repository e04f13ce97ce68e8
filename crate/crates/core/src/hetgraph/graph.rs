use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GraphError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    User,
    Tweet,
    Comment,
    Hashtag,
    Entity,
}

impl NodeType {
    pub const ALL: [NodeType; 5] = [
        NodeType::User,
        NodeType::Tweet,
        NodeType::Comment,
        NodeType::Hashtag,
        NodeType::Entity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::User => "User",
            NodeType::Tweet => "Tweet",
            NodeType::Comment => "Comment",
            NodeType::Hashtag => "Hashtag",
            NodeType::Entity => "Entity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeType {
    Follow,
    Post,
    Write,
    Reply,
    Retweet,
    Contain,
}

impl EdgeType {
    pub const ALL: [EdgeType; 6] = [
        EdgeType::Follow,
        EdgeType::Post,
        EdgeType::Write,
        EdgeType::Reply,
        EdgeType::Retweet,
        EdgeType::Contain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Follow => "Follow",
            EdgeType::Post => "Post",
            EdgeType::Write => "Write",
            EdgeType::Reply => "Reply",
            EdgeType::Retweet => "Retweet",
            EdgeType::Contain => "Contain",
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeType {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| GraphError::UnknownType(s.to_string()))
    }
}

impl FromStr for EdgeType {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| GraphError::UnknownType(s.to_string()))
    }
}

/// Input description of one node; `id` is the external identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub id: u64,
    pub node_type: NodeType,
    pub features: Vec<f64>,
}

/// Input description of one directed edge between external ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeSpec {
    pub src: u64,
    pub dst: u64,
    pub rel: EdgeType,
}

/// A directed, typed edge between dense node indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub rel: EdgeType,
}

/// Disjoint train/validation/test subsets of the target set, as node indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Typed multi-relational graph with node features and sparse user labels.
///
/// Nodes are addressed by dense indices `0..n_nodes`; the external ids they
/// were built from are kept so derived graphs stay comparable.
#[derive(Clone, Debug)]
pub struct HetGraph {
    ids: Vec<u64>,
    index_of: HashMap<u64, usize>,
    node_types: Vec<NodeType>,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Option<u8>>,
    edges: Vec<Edge>,
    out_offsets: Vec<usize>,
    out_edges: Vec<usize>,
    nbr_offsets: Vec<usize>,
    nbrs: Vec<usize>,
    targets: Vec<usize>,
    masks: Masks,
}

/// Builds a graph from typed nodes, directed typed edges, and labels keyed by
/// external id. The target set is every labeled user, ascending by index.
pub fn build_graph(
    nodes: &[NodeSpec],
    edges: &[EdgeSpec],
    labels: &[(u64, u8)],
) -> Result<HetGraph, GraphError> {
    let dim = nodes.first().map_or(0, |n| n.features.len());
    let mut index_of = HashMap::with_capacity(nodes.len());
    let mut features = Vec::with_capacity(nodes.len() * dim);
    for (i, n) in nodes.iter().enumerate() {
        if index_of.insert(n.id, i).is_some() {
            return Err(GraphError::DuplicateNode(n.id));
        }
        if n.features.len() != dim {
            return Err(GraphError::DimensionMismatch {
                node: n.id,
                expected: dim,
                found: n.features.len(),
            });
        }
        if n.features.iter().any(|v| !v.is_finite()) {
            return Err(GraphError::NonFiniteFeature(n.id));
        }
        features.extend_from_slice(&n.features);
    }
    let mut resolved = Vec::with_capacity(edges.len());
    for e in edges {
        let src = *index_of.get(&e.src).ok_or(GraphError::UnknownNode(e.src))?;
        let dst = *index_of.get(&e.dst).ok_or(GraphError::UnknownNode(e.dst))?;
        resolved.push(Edge { src, dst, rel: e.rel });
    }
    let node_types: Vec<NodeType> = nodes.iter().map(|n| n.node_type).collect();
    let mut label_vec = vec![None; nodes.len()];
    for &(id, y) in labels {
        let i = *index_of.get(&id).ok_or(GraphError::UnknownNode(id))?;
        if node_types[i] != NodeType::User {
            return Err(GraphError::LabelOnNonUser(id));
        }
        if y > 1 {
            return Err(GraphError::InvalidLabel { node: id, label: y });
        }
        label_vec[i] = Some(y);
    }
    Ok(HetGraph::assemble(
        nodes.iter().map(|n| n.id).collect(),
        index_of,
        node_types,
        dim,
        features,
        label_vec,
        resolved,
    ))
}

impl HetGraph {
    pub(crate) fn assemble(
        ids: Vec<u64>,
        index_of: HashMap<u64, usize>,
        node_types: Vec<NodeType>,
        dim: usize,
        features: Vec<f64>,
        labels: Vec<Option<u8>>,
        edges: Vec<Edge>,
    ) -> Self {
        let n = ids.len();
        let mut out_count = vec![0usize; n + 1];
        for e in &edges {
            out_count[e.src + 1] += 1;
        }
        for i in 0..n {
            out_count[i + 1] += out_count[i];
        }
        let out_offsets = out_count.clone();
        let mut cursor = out_count;
        let mut out_edges = vec![0usize; edges.len()];
        for (ei, e) in edges.iter().enumerate() {
            out_edges[cursor[e.src]] = ei;
            cursor[e.src] += 1;
        }

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &edges {
            if e.src != e.dst {
                adj[e.src].push(e.dst);
                adj[e.dst].push(e.src);
            }
        }
        let mut nbr_offsets = Vec::with_capacity(n + 1);
        let mut nbrs = Vec::new();
        nbr_offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            nbrs.extend_from_slice(list);
            nbr_offsets.push(nbrs.len());
        }

        let targets = (0..n)
            .filter(|&i| labels[i].is_some() && node_types[i] == NodeType::User)
            .collect();
        Self {
            ids,
            index_of,
            node_types,
            dim,
            features,
            labels,
            edges,
            out_offsets,
            out_edges,
            nbr_offsets,
            nbrs,
            targets,
            masks: Masks::default(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn node_type(&self, i: usize) -> NodeType {
        self.node_types[i]
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Option<u8> {
        self.labels[i]
    }

    pub fn external_id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges leaving `i`, in insertion order.
    pub fn out_edges(&self, i: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.out_edges[self.out_offsets[i]..self.out_offsets[i + 1]]
            .iter()
            .map(move |&ei| &self.edges[ei])
    }

    /// Distinct neighbors of `i` ignoring edge direction, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.nbrs[self.nbr_offsets[i]..self.nbr_offsets[i + 1]]
    }

    /// Undirected degree (distinct neighbors).
    pub fn degree(&self, i: usize) -> usize {
        self.nbr_offsets[i + 1] - self.nbr_offsets[i]
    }

    /// Labeled users, ascending by index.
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn masks(&self) -> &Masks {
        &self.masks
    }

    /// Installs train/validation/test masks after checking they are
    /// pairwise-disjoint subsets of the target set.
    pub fn set_masks(&mut self, masks: Masks) -> Result<(), GraphError> {
        let targets: HashSet<usize> = self.targets.iter().copied().collect();
        let mut seen = HashSet::new();
        for &i in masks.train.iter().chain(&masks.val).chain(&masks.test) {
            if !targets.contains(&i) {
                return Err(GraphError::MaskNotTarget(i));
            }
            if !seen.insert(i) {
                return Err(GraphError::MaskOverlap(i));
            }
        }
        self.masks = masks;
        Ok(())
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self, GraphError> {
        self.set_masks(masks)?;
        Ok(self)
    }

    pub(crate) fn raw_parts(&self) -> (&[u64], &[NodeType], &[f64], &[Option<u8>]) {
        (&self.ids, &self.node_types, &self.features, &self.labels)
    }

    /// Checks every structural invariant; used by tests and after decoding.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.n_nodes();
        if self.node_types.len() != n || self.labels.len() != n {
            return Err("per-node arrays disagree in length".into());
        }
        if self.features.len() != n * self.dim {
            return Err("feature buffer is not n_nodes * dim".into());
        }
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return Err(format!("edge endpoint out of range: {e:?}"));
            }
        }
        for i in 0..n {
            if self.labels[i].is_some() && self.node_types[i] != NodeType::User {
                return Err(format!("label on non-user node {i}"));
            }
            if self.index_of.get(&self.ids[i]) != Some(&i) {
                return Err(format!("id index broken at {i}"));
            }
        }
        let expected: Vec<usize> = (0..n).filter(|&i| self.labels[i].is_some()).collect();
        if expected != self.targets {
            return Err("target set is not the ascending labeled users".into());
        }
        // Adjacency index consistency.
        let mut out_seen = 0;
        for i in 0..n {
            for e in self.out_edges(i) {
                if e.src != i {
                    return Err(format!("out-edge index of {i} lists foreign edge"));
                }
                out_seen += 1;
            }
        }
        if out_seen != self.edges.len() {
            return Err("out-edge index does not cover every edge".into());
        }
        let mut undirected: Vec<HashSet<usize>> = vec![HashSet::new(); n];
        for e in &self.edges {
            if e.src != e.dst {
                undirected[e.src].insert(e.dst);
                undirected[e.dst].insert(e.src);
            }
        }
        for (i, set) in undirected.iter().enumerate() {
            let listed: HashSet<usize> = self.neighbors(i).iter().copied().collect();
            if &listed != set {
                return Err(format!("neighbor index of {i} inconsistent"));
            }
        }
        let targets: HashSet<usize> = self.targets.iter().copied().collect();
        let mut seen = HashSet::new();
        for &i in self
            .masks
            .train
            .iter()
            .chain(&self.masks.val)
            .chain(&self.masks.test)
        {
            if !targets.contains(&i) || !seen.insert(i) {
                return Err(format!("mask entry {i} invalid or repeated"));
            }
        }
        Ok(())
    }
}
