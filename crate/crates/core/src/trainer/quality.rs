use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's 2-means from `restarts` seeded initializations, keeping the
/// assignment of lowest inertia. Cluster ids are `0` and `1`.
pub fn kmeans2(points: &[Vec<f64>], restarts: usize, seed: u64) -> Result<Vec<usize>, TrainError> {
    if points.len() < 2 {
        return Err(TrainError::InvalidConfig("2-means needs at least two points".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(TrainError::InvalidConfig("points differ in dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let init = index::sample(&mut rng, points.len(), 2);
        let mut centers = [points[init.index(0)].clone(), points[init.index(1)].clone()];
        let mut assign = vec![usize::MAX; points.len()];
        for _ in 0..300 {
            let mut changed = false;
            for (a, p) in assign.iter_mut().zip(points) {
                let c = usize::from(sq_dist(p, &centers[1]) < sq_dist(p, &centers[0]));
                if *a != c {
                    *a = c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            for (c, center) in centers.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> = points
                    .iter()
                    .zip(&assign)
                    .filter(|&(_, &a)| a == c)
                    .map(|(p, _)| p)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                for (j, v) in center.iter_mut().enumerate() {
                    *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
                }
            }
        }
        let inertia: f64 = points
            .iter()
            .zip(&assign)
            .map(|(p, &a)| sq_dist(p, &centers[a]))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, assign));
        }
    }
    Ok(best.expect("at least one restart").1)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `1 − H(class | cluster) / H(class)`; `1` when only one class occurs.
pub fn homogeneity(classes: &[usize], clusters: &[usize]) -> f64 {
    let n = classes.len();
    if n == 0 {
        return 1.0;
    }
    let n_class = classes.iter().max().map_or(0, |m| m + 1);
    let n_clust = clusters.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; n_class * n_clust];
    for (&c, &k) in classes.iter().zip(clusters) {
        joint[c * n_clust + k] += 1;
    }
    let class_counts = (0..n_class).map(|c| (0..n_clust).map(|k| joint[c * n_clust + k]).sum());
    let h_c = entropy(class_counts, n as f64);
    if h_c == 0.0 {
        return 1.0;
    }
    let mut h_c_given_k = 0.0;
    for k in 0..n_clust {
        let size: usize = (0..n_class).map(|c| joint[c * n_clust + k]).sum();
        for c in 0..n_class {
            let nck = joint[c * n_clust + k];
            if nck > 0 {
                let p = nck as f64 / n as f64;
                h_c_given_k -= p * (nck as f64 / size as f64).ln();
            }
        }
    }
    1.0 - h_c_given_k / h_c
}

/// Homogeneity of a seeded 2-means clustering (10 restarts) against the
/// true labels.
pub fn embedding_quality(embeddings: &[Vec<f64>], labels: &[u8], seed: u64) -> Result<f64, TrainError> {
    if embeddings.len() != labels.len() {
        return Err(TrainError::InvalidConfig(
            "embeddings and labels differ in length".into(),
        ));
    }
    let clusters = kmeans2(embeddings, 10, seed)?;
    let classes: Vec<usize> = labels.iter().map(|&l| usize::from(l)).collect();
    Ok(homogeneity(&classes, &clusters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_partition_is_one() {
        assert!((homogeneity(&[0, 0, 1, 1], &[1, 1, 0, 0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_partition_is_zero() {
        assert!(homogeneity(&[0, 1, 0, 1], &[0, 0, 1, 1]).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_one() {
        assert_eq!(homogeneity(&[0, 0, 0], &[0, 1, 0]), 1.0);
    }

    #[test]
    fn half_mixed_cluster() {
        // Clusters {a,a} and {a,b,b,b}: H(C) = ln2 for 3/3 classes,
        // H(C|K) = (4/6)·H(1/4, 3/4).
        let classes = [0, 0, 0, 1, 1, 1];
        let clusters = [0, 0, 1, 1, 1, 1];
        let h_ck = (4.0 / 6.0) * -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        let want = 1.0 - h_ck / std::f64::consts::LN_2;
        assert!((homogeneity(&classes, &clusters) - want).abs() < 1e-12);
    }

    #[test]
    fn two_tight_pairs() {
        let pts = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![5.0, 5.0], vec![5.0, 5.1]];
        let h = embedding_quality(&pts, &[0, 0, 1, 1], 3).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
    }
}
