use super::{GnnError, StackVars};
use crate::numcore::{Tape, Var};

/// Row-major `n×n` relevance mask: entry `(i, j)` is true when member sets
/// `i` and `j` share at least one node. The diagonal is always true.
pub fn overlap_mask(members: &[&[usize]]) -> Vec<bool> {
    let n = members.len();
    let mut mask = vec![false; n * n];
    for i in 0..n {
        mask[i * n + i] = true;
        for j in (i + 1)..n {
            let hit = sorted_intersect(members[i], members[j]);
            mask[i * n + j] = hit;
            mask[j * n + i] = hit;
        }
    }
    mask
}

fn sorted_intersect(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Output of [`attention_aggregate`]: the aggregated embeddings and the
/// per-head attention matrices.
#[derive(Clone, Debug)]
pub struct Attended {
    pub z: Var,
    pub alphas: Vec<Var>,
}

/// Multi-head attention across a batch of subgraph embeddings.
///
/// For head `k`, `e_ij = LeakyReLU(aᵀ[W z_i ‖ W z_j])` is softmaxed over the
/// relevant set of `i` (masked by `mask`), and
/// `z_i = (1/K) Σ_k Σ_j α_ij W z_j`.
pub fn attention_aggregate(
    tape: &mut Tape,
    vars: &StackVars,
    z_pre: Var,
    mask: &[bool],
    slope: f64,
) -> Result<Attended, GnnError> {
    let (b, h) = tape.value(z_pre).shape();
    if b == 0 {
        return Err(GnnError::EmptyBatch);
    }
    if mask.len() != b * b {
        return Err(GnnError::MaskShape { batch: b, len: mask.len() });
    }
    let mut total: Option<Var> = None;
    let mut alphas = Vec::with_capacity(vars.heads.len());
    for &(w, a) in &vars.heads {
        let zw = tape.matmul(z_pre, w)?;
        let a_src = tape.slice_rows(a, 0, h)?;
        let a_dst = tape.slice_rows(a, h, h)?;
        let s_src = tape.matmul(zw, a_src)?;
        let s_dst = tape.matmul(zw, a_dst)?;
        let scores = tape.outer_sum(s_src, s_dst)?;
        let scores = tape.leaky_relu(scores, slope)?;
        let alpha = tape.masked_softmax_rows(scores, mask)?;
        let head_out = tape.matmul(alpha, zw)?;
        total = Some(match total {
            None => head_out,
            Some(t) => tape.add(t, head_out)?,
        });
        alphas.push(alpha);
    }
    let total = total.ok_or_else(|| GnnError::InvalidConfig("no attention heads".into()))?;
    let z = tape.scale(total, 1.0 / vars.heads.len() as f64)?;
    Ok(Attended { z, alphas })
}
