use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GnnError;
use crate::hetgraph::{extract_subgraph, HetGraph, Subgraph};
use crate::numcore::{Tape, Tensor, Var};

/// Which triplet objective the pretext task minimizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SslLossForm {
    /// `−max(σ(z·z⁺) − σ(z·z⁻) + ε, 0)`.
    #[default]
    AsPrinted,
    /// `max(σ(z·z⁻) − σ(z·z⁺) + ε, 0)`.
    StandardHinge,
}

/// Positive width and negative center drawn for one anchor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SslChoice {
    pub positive_width: usize,
    pub negative_center: usize,
}

/// Draws `k̄` uniformly from `[1, k_max] \ {k}` and a negative center
/// uniformly from `targets \ {center}`.
pub fn ssl_choice<R: Rng + ?Sized>(
    center: usize,
    k: usize,
    targets: &[usize],
    k_max: usize,
    rng: &mut R,
) -> Result<SslChoice, GnnError> {
    if k_max < 2 {
        return Err(GnnError::InvalidConfig(
            "self-supervision needs at least two widths".into(),
        ));
    }
    let widths: Vec<usize> = (1..=k_max).filter(|&w| w != k).collect();
    let others: Vec<usize> = targets.iter().copied().filter(|&t| t != center).collect();
    if others.is_empty() {
        return Err(GnnError::InvalidConfig(
            "self-supervision needs a second target".into(),
        ));
    }
    Ok(SslChoice {
        positive_width: widths[rng.gen_range(0..widths.len())],
        negative_center: others[rng.gen_range(0..others.len())],
    })
}

/// Positive (same center, other width) and negative (other center, same
/// width) subgraphs for an anchor, seeded.
pub fn ssl_sample(
    g: &HetGraph,
    center: usize,
    k: usize,
    targets: &[usize],
    k_max: usize,
    seed: u64,
) -> Result<(Subgraph, Subgraph), GnnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choice = ssl_choice(center, k, targets, k_max, &mut rng)?;
    let pos = extract_subgraph(g, center, choice.positive_width)?;
    let neg = extract_subgraph(g, choice.negative_center, k)?;
    Ok((pos, neg))
}

/// Triplet pretext loss over sigmoid-squashed dot-product similarities.
pub fn ssl_loss(
    tape: &mut Tape,
    z: Var,
    z_pos: Var,
    z_neg: Var,
    margin: f64,
    form: SslLossForm,
) -> Result<Var, GnnError> {
    let dp = tape.dot(z, z_pos)?;
    let dn = tape.dot(z, z_neg)?;
    let sp = tape.sigmoid(dp)?;
    let sn = tape.sigmoid(dn)?;
    let eps = tape.constant(Tensor::scalar(margin))?;
    let out = match form {
        SslLossForm::AsPrinted => {
            let gap = tape.sub(sp, sn)?;
            let gap = tape.add(gap, eps)?;
            let hinge = tape.relu(gap)?;
            tape.scale(hinge, -1.0)?
        }
        SslLossForm::StandardHinge => {
            let gap = tape.sub(sn, sp)?;
            let gap = tape.add(gap, eps)?;
            tape.relu(gap)?
        }
    };
    Ok(out)
}
