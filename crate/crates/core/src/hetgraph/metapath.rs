use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Edge, EdgeType, GraphError, HetGraph, NodeType};

/// One typed hop of a meta-path: `src -rel-> dst`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetaStep {
    pub src: NodeType,
    pub rel: EdgeType,
    pub dst: NodeType,
}

/// A chain of typed hops over the network schema.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<MetaStep>", into = "Vec<MetaStep>")]
pub struct MetaPath {
    steps: Vec<MetaStep>,
}

impl MetaPath {
    pub fn new(steps: Vec<MetaStep>) -> Result<Self, GraphError> {
        if steps.is_empty() {
            return Err(GraphError::MalformedMetaPath("meta-path needs at least one step".into()));
        }
        for w in steps.windows(2) {
            if w[0].dst != w[1].src {
                return Err(GraphError::MalformedMetaPath(format!(
                    "step ending at {} cannot chain into step starting at {}",
                    w[0].dst, w[1].src
                )));
            }
        }
        Ok(Self { steps })
    }

    /// Shorthand for `[(t0, r0, t1), (t1, r1, t2), ...]`.
    pub fn chain(types: &[NodeType], rels: &[EdgeType]) -> Result<Self, GraphError> {
        if types.len() != rels.len() + 1 {
            return Err(GraphError::MalformedMetaPath(
                "need exactly one more node type than relations".into(),
            ));
        }
        Self::new(
            rels.iter()
                .enumerate()
                .map(|(i, &rel)| MetaStep {
                    src: types[i],
                    rel,
                    dst: types[i + 1],
                })
                .collect(),
        )
    }

    pub fn steps(&self) -> &[MetaStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The five social-graph relations kept by default: following, posting
    /// tweets that carry hashtags or entities, commenting on tweets, and
    /// retweeting.
    pub fn defaults() -> Vec<MetaPath> {
        use EdgeType::*;
        use NodeType::*;
        vec![
            MetaPath::chain(&[User, User], &[Follow]),
            MetaPath::chain(&[User, Tweet, Hashtag], &[Post, Contain]),
            MetaPath::chain(&[User, Tweet, Entity], &[Post, Contain]),
            MetaPath::chain(&[User, Comment, Tweet], &[Write, Reply]),
            MetaPath::chain(&[User, Tweet], &[Retweet]),
        ]
        .into_iter()
        .map(|p| p.expect("default meta-paths are well formed"))
        .collect()
    }
}

impl TryFrom<Vec<MetaStep>> for MetaPath {
    type Error = GraphError;

    fn try_from(steps: Vec<MetaStep>) -> Result<Self, Self::Error> {
        MetaPath::new(steps)
    }
}

impl From<MetaPath> for Vec<MetaStep> {
    fn from(p: MetaPath) -> Self {
        p.steps
    }
}

fn step_matches(g: &HetGraph, e: &Edge, step: &MetaStep) -> bool {
    e.rel == step.rel && g.node_type(e.src) == step.src && g.node_type(e.dst) == step.dst
}

/// Marks every edge lying on at least one instance (a walk whose hops match
/// the path's types and relations, following edge direction) of `path`.
fn mark_path_edges(g: &HetGraph, path: &MetaPath, keep: &mut [bool]) {
    let n = g.n_nodes();
    let steps = path.steps();
    // forward[i][v]: some prefix instance of length i ends at v.
    let mut forward = vec![vec![false; n]; steps.len() + 1];
    for v in 0..n {
        forward[0][v] = g.node_type(v) == steps[0].src;
    }
    for (i, step) in steps.iter().enumerate() {
        for e in g.edges() {
            if forward[i][e.src] && step_matches(g, e, step) {
                forward[i + 1][e.dst] = true;
            }
        }
    }
    // backward[i][v]: v is reachable as position i and the suffix completes.
    let mut backward = vec![vec![false; n]; steps.len() + 1];
    backward[steps.len()] = forward[steps.len()].clone();
    for (i, step) in steps.iter().enumerate().rev() {
        for e in g.edges() {
            if forward[i][e.src] && backward[i + 1][e.dst] && step_matches(g, e, step) {
                backward[i][e.src] = true;
            }
        }
    }
    for (ei, e) in g.edges().iter().enumerate() {
        if keep[ei] {
            continue;
        }
        keep[ei] = steps.iter().enumerate().any(|(i, step)| {
            forward[i][e.src] && backward[i + 1][e.dst] && step_matches(g, e, step)
        });
    }
}

/// Keeps exactly the nodes and edges lying on an instance of some path.
/// Target users survive even when isolated; other isolated nodes are dropped.
/// Masks, labels, and features carry over.
pub fn filter_by_metapaths(g: &HetGraph, paths: &[MetaPath]) -> HetGraph {
    let mut keep_edge = vec![false; g.n_edges()];
    for p in paths {
        mark_path_edges(g, p, &mut keep_edge);
    }
    let mut keep_node = vec![false; g.n_nodes()];
    for &t in g.targets() {
        keep_node[t] = true;
    }
    for (e, _) in g.edges().iter().zip(&keep_edge).filter(|(_, &k)| k) {
        keep_node[e.src] = true;
        keep_node[e.dst] = true;
    }

    let (ids, types, features, labels) = g.raw_parts();
    let dim = g.feature_dim();
    let mut remap = vec![usize::MAX; g.n_nodes()];
    let mut new_ids = Vec::new();
    let mut index_of = HashMap::new();
    let mut new_types = Vec::new();
    let mut new_features = Vec::new();
    let mut new_labels = Vec::new();
    for (old, _) in keep_node.iter().enumerate().filter(|(_, &k)| k) {
        remap[old] = new_ids.len();
        index_of.insert(ids[old], new_ids.len());
        new_ids.push(ids[old]);
        new_types.push(types[old]);
        new_features.extend_from_slice(&features[old * dim..(old + 1) * dim]);
        new_labels.push(labels[old]);
    }
    let edges = g
        .edges()
        .iter()
        .zip(&keep_edge)
        .filter(|(_, &k)| k)
        .map(|(e, _)| Edge {
            src: remap[e.src],
            dst: remap[e.dst],
            rel: e.rel,
        })
        .collect();
    let mut out = HetGraph::assemble(
        new_ids,
        index_of,
        new_types,
        dim,
        new_features,
        new_labels,
        edges,
    );
    let m = g.masks();
    let map = |v: &Vec<usize>| v.iter().map(|&i| remap[i]).collect();
    out.set_masks(super::Masks {
        train: map(&m.train),
        val: map(&m.val),
        test: map(&m.test),
    })
    .expect("targets and masks survive filtering");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{build_graph, EdgeSpec, NodeSpec};

    fn node(id: u64, t: NodeType) -> NodeSpec {
        NodeSpec {
            id,
            node_type: t,
            features: vec![id as f64],
        }
    }

    #[test]
    fn chaining_is_checked() {
        use EdgeType::*;
        use NodeType::*;
        let bad = MetaPath::new(vec![
            MetaStep {
                src: User,
                rel: Post,
                dst: Tweet,
            },
            MetaStep {
                src: Hashtag,
                rel: Contain,
                dst: Entity,
            },
        ]);
        assert!(bad.is_err());
        assert!(MetaPath::new(vec![]).is_err());
        assert_eq!(MetaPath::defaults().len(), 5);
    }

    #[test]
    fn follow_path_drops_post_edge() {
        use EdgeType::*;
        use NodeType::*;
        let g = build_graph(
            &[node(0, User), node(1, User), node(2, Tweet)],
            &[
                EdgeSpec { src: 0, dst: 1, rel: Follow },
                EdgeSpec { src: 0, dst: 2, rel: Post },
            ],
            &[],
        )
        .unwrap();
        let path = MetaPath::chain(&[User, User], &[Follow]).unwrap();
        let f = filter_by_metapaths(&g, &[path]);
        assert_eq!(f.n_nodes(), 2);
        assert_eq!(f.n_edges(), 1);
        assert_eq!(f.edges()[0].rel, Follow);
        assert_eq!(f.external_id(0), 0);
        assert_eq!(f.external_id(1), 1);
    }

    #[test]
    fn isolated_target_is_retained() {
        use NodeType::*;
        let g = build_graph(&[node(0, User), node(7, Hashtag)], &[], &[(0, 1)]).unwrap();
        let f = filter_by_metapaths(&g, &MetaPath::defaults());
        assert_eq!(f.n_nodes(), 1);
        assert_eq!(f.targets(), &[0]);
        assert_eq!(f.label(0), Some(1));
    }

    #[test]
    fn empty_graph_stays_empty() {
        let g = build_graph(&[], &[], &[]).unwrap();
        let f = filter_by_metapaths(&g, &MetaPath::defaults());
        assert_eq!(f.n_nodes(), 0);
        assert_eq!(f.n_edges(), 0);
    }

    #[test]
    fn partial_instance_is_dropped() {
        use EdgeType::*;
        use NodeType::*;
        // User posts a tweet that contains nothing: no complete instance of
        // User-Post-Tweet-Contain-Hashtag.
        let g = build_graph(
            &[node(0, User), node(1, Tweet), node(2, Tweet), node(3, Hashtag)],
            &[
                EdgeSpec { src: 0, dst: 1, rel: Post },
                EdgeSpec { src: 0, dst: 2, rel: Post },
                EdgeSpec { src: 2, dst: 3, rel: Contain },
            ],
            &[],
        )
        .unwrap();
        let path = MetaPath::chain(&[User, Tweet, Hashtag], &[Post, Contain]).unwrap();
        let f = filter_by_metapaths(&g, &[path]);
        let kept: Vec<u64> = (0..f.n_nodes()).map(|i| f.external_id(i)).collect();
        assert_eq!(kept, vec![0, 2, 3]);
        assert_eq!(f.n_edges(), 2);
    }
}
