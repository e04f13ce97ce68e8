use super::{GraphError, Subgraph};

/// Upper bound on the walk count credited to any single target.
pub const WALK_COUNT_CAP: u128 = 1_000_000;

/// Walk counts from the subgraph center to every local node, summed over walk
/// lengths `1..=max_len` on the undirected simple adjacency.
pub fn walk_counts(sub: &Subgraph, max_len: usize) -> Vec<u128> {
    let adj = sub.undirected_adjacency();
    let n = sub.len();
    let mut frontier = vec![0u128; n];
    let mut total = vec![0u128; n];
    if n == 0 {
        return total;
    }
    frontier[0] = 1;
    for _ in 0..max_len {
        let mut next = vec![0u128; n];
        for (v, &count) in frontier.iter().enumerate() {
            if count == 0 {
                continue;
            }
            for &u in &adj[v] {
                next[u] = next[u].saturating_add(count);
            }
        }
        for (t, &c) in total.iter_mut().zip(&next) {
            *t = t.saturating_add(c);
        }
        frontier = next;
    }
    total
}

/// Probability of jumping from the subgraph's center to each entry of
/// `targets`.
///
/// A target's weight is the number of walks of length `1..=2k` from the center
/// that end on it inside the subgraph (capped at [`WALK_COUNT_CAP`]); the
/// center itself and targets outside the subgraph weigh zero. Weights are
/// L1-normalized. When nothing is reachable the mass is spread uniformly
/// over the targets other than the center.
pub fn transition_distribution(sub: &Subgraph, targets: &[usize]) -> Result<Vec<f64>, GraphError> {
    if targets.is_empty() {
        return Err(GraphError::EmptyTargets);
    }
    let counts = walk_counts(sub, 2 * sub.width);
    let weights: Vec<u128> = targets
        .iter()
        .map(|&t| {
            if t == sub.center {
                return 0;
            }
            sub.local_index(t)
                .map_or(0, |li| counts[li].min(WALK_COUNT_CAP))
        })
        .collect();
    let total: u128 = weights.iter().sum();
    if total > 0 {
        let total = total as f64;
        return Ok(weights.iter().map(|&w| w as f64 / total).collect());
    }
    let others = targets.iter().filter(|&&t| t != sub.center).count();
    if others == 0 {
        // The center is the only target; staying put is the only move.
        return Ok(targets.iter().map(|_| 1.0 / targets.len() as f64).collect());
    }
    Ok(targets
        .iter()
        .map(|&t| if t == sub.center { 0.0 } else { 1.0 / others as f64 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{build_graph, extract_subgraph, EdgeSpec, EdgeType, NodeSpec, NodeType};

    fn users(n: u64, edges: &[(u64, u64)]) -> crate::hetgraph::HetGraph {
        let nodes: Vec<NodeSpec> = (0..n)
            .map(|id| NodeSpec {
                id,
                node_type: NodeType::User,
                features: vec![0.0],
            })
            .collect();
        let edges: Vec<EdgeSpec> = edges
            .iter()
            .map(|&(src, dst)| EdgeSpec { src, dst, rel: EdgeType::Follow })
            .collect();
        build_graph(&nodes, &edges, &[]).unwrap()
    }

    #[test]
    fn fallback_is_uniform_over_others() {
        let g = users(4, &[(0, 1)]);
        let sub = extract_subgraph(&g, 0, 1).unwrap();
        let p = transition_distribution(&sub, &[0, 2, 3]).unwrap();
        assert_eq!(p, vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn single_reachable_target_gets_all_mass() {
        // Triangle center(0) - x(1) - t(2).
        let g = users(3, &[(0, 1), (1, 2), (2, 0)]);
        let sub = extract_subgraph(&g, 0, 1).unwrap();
        let p = transition_distribution(&sub, &[0, 2]).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
    }

    #[test]
    fn two_targets_weighted_by_walks() {
        // Star: center 0 with leaves 1, 2, 3; extra edge 1-3. With k = 1 walks
        // have length 1 or 2. Target 1: 0-1, 0-3-1 → 2. Target 2: 0-2 → 1.
        let g = users(4, &[(0, 1), (0, 2), (0, 3), (1, 3)]);
        let sub = extract_subgraph(&g, 0, 1).unwrap();
        let p = transition_distribution(&sub, &[1, 2]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_targets_rejected() {
        let g = users(1, &[]);
        let sub = extract_subgraph(&g, 0, 1).unwrap();
        assert!(matches!(
            transition_distribution(&sub, &[]),
            Err(GraphError::EmptyTargets)
        ));
    }
}
