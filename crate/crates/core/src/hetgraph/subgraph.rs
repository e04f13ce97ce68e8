use std::collections::{HashMap, VecDeque};

use super::{EdgeType, GraphError, HetGraph, NodeType};
use crate::numcore::Tensor;

/// k-hop induced neighborhood of a target user.
///
/// `nodes[0]` is the center; the rest are ascending by global index.
/// `edges` are the source edges with both endpoints inside, in local indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    pub center: usize,
    pub width: usize,
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize, EdgeType)>,
    pub features: Tensor,
}

impl Subgraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Local index of a global node, if it is a member.
    pub fn local_index(&self, global: usize) -> Option<usize> {
        if self.nodes.first() == Some(&global) {
            return Some(0);
        }
        self.nodes[1..]
            .binary_search(&global)
            .ok()
            .map(|i| i + 1)
    }

    /// Distinct undirected neighbor lists in local indices, self-loops dropped.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b, _) in &self.edges {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Collects every node within `k` undirected hops of `center` and the edges
/// induced among them.
pub fn extract_subgraph(g: &HetGraph, center: usize, k: usize) -> Result<Subgraph, GraphError> {
    if center >= g.n_nodes() {
        return Err(GraphError::UnknownCenter(center));
    }
    if g.node_type(center) != NodeType::User {
        return Err(GraphError::CenterNotUser(center));
    }
    let mut dist: HashMap<usize, usize> = HashMap::new();
    dist.insert(center, 0);
    let mut queue = VecDeque::from([center]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == k {
            continue;
        }
        for &u in g.neighbors(v) {
            dist.entry(u).or_insert_with(|| {
                queue.push_back(u);
                d + 1
            });
        }
    }
    let mut rest: Vec<usize> = dist.keys().copied().filter(|&v| v != center).collect();
    rest.sort_unstable();
    let mut nodes = Vec::with_capacity(rest.len() + 1);
    nodes.push(center);
    nodes.extend(rest);

    let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut edges = Vec::new();
    for (li, &v) in nodes.iter().enumerate() {
        for e in g.out_edges(v) {
            if let Some(&lj) = local.get(&e.dst) {
                edges.push((li, lj, e.rel));
            }
        }
    }
    let dim = g.feature_dim();
    let mut data = Vec::with_capacity(nodes.len() * dim);
    for &v in &nodes {
        data.extend_from_slice(g.features(v));
    }
    let features = Tensor::from_vec(nodes.len(), dim, data).expect("rows sized by node count");
    Ok(Subgraph {
        center,
        width: k,
        nodes,
        edges,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{build_graph, EdgeSpec, NodeSpec};

    fn chain() -> HetGraph {
        let nodes: Vec<NodeSpec> = (0..3)
            .map(|id| NodeSpec {
                id,
                node_type: NodeType::User,
                features: vec![id as f64, 1.0],
            })
            .collect();
        let edges = [
            EdgeSpec { src: 0, dst: 1, rel: EdgeType::Follow },
            EdgeSpec { src: 2, dst: 1, rel: EdgeType::Follow },
        ];
        build_graph(&nodes, &edges, &[]).unwrap()
    }

    #[test]
    fn zero_width_is_center_only() {
        let s = extract_subgraph(&chain(), 1, 0).unwrap();
        assert_eq!(s.nodes, vec![1]);
        assert!(s.edges.is_empty());
        assert_eq!(s.features.data(), &[1.0, 1.0]);
    }

    #[test]
    fn one_hop_on_chain() {
        let s = extract_subgraph(&chain(), 0, 1).unwrap();
        assert_eq!(s.nodes, vec![0, 1]);
        assert_eq!(s.edges, vec![(0, 1, EdgeType::Follow)]);
    }

    #[test]
    fn direction_is_ignored_and_center_comes_first() {
        let s = extract_subgraph(&chain(), 2, 2).unwrap();
        assert_eq!(s.nodes, vec![2, 0, 1]);
        assert_eq!(s.local_index(1), Some(2));
        assert_eq!(s.local_index(2), Some(0));
        assert_eq!(s.edges.len(), 2);
        assert_eq!(s.features.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn unknown_center() {
        assert!(matches!(
            extract_subgraph(&chain(), 9, 1),
            Err(GraphError::UnknownCenter(9))
        ));
    }
}
