use rand::Rng;

use super::{TrainConfig, TrainError, Workspace};
use crate::gnn::{
    embed_single, forward_batch, ssl_choice, ssl_loss, total_loss, GnnStack, GraphInput,
    SubgraphEmbedding,
};
use crate::numcore::{Adam, Tape};
use crate::rl::AgentPair;

/// One target with the width and depth used to embed it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Item {
    pub target: usize,
    pub k: usize,
    pub l: usize,
}

/// Sampling context for the pretext loss: candidate negative centers and
/// the random stream choosing positives and negatives.
pub(crate) struct SslContext<'a, R: Rng> {
    pub pool: &'a [usize],
    pub rng: &'a mut R,
}

/// One Adam update of `stack` on a batch, returning the loss before the
/// update. Items attend to each other when their subgraphs overlap. With an
/// SSL context, each item adds a triplet term against a same-center
/// subgraph of another width and another center's subgraph of equal width.
pub(crate) fn train_step_inner<R: Rng>(
    ws: &Workspace,
    stack: &mut GnnStack,
    items: &[Item],
    cfg: &TrainConfig,
    ssl: Option<SslContext<'_, R>>,
) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let vars = stack.bind(&mut tape)?;
    let inputs: Vec<(&GraphInput, usize)> = items
        .iter()
        .map(|it| Ok((ws.input(it.target, it.k)?, it.l)))
        .collect::<Result<_, TrainError>>()?;
    let out = forward_batch(&mut tape, &vars, &inputs, cfg.attention_slope)?;
    let labels: Vec<f64> = items
        .iter()
        .map(|it| ws.label(it.target))
        .collect::<Result<_, _>>()?;
    let mut ssl_terms = Vec::new();
    if let Some(ctx) = ssl {
        for (i, it) in items.iter().enumerate() {
            let choice = ssl_choice(it.target, it.k, ctx.pool, cfg.agent.k_max, ctx.rng)?;
            let pos = ws.input(it.target, choice.positive_width)?;
            let neg = ws.input(choice.negative_center, it.k)?;
            let z = tape.slice_rows(out.z, i, 1)?;
            let zp = embed_single(&mut tape, &vars, pos, it.l, cfg.attention_slope)?;
            let zn = embed_single(&mut tape, &vars, neg, it.l, cfg.attention_slope)?;
            ssl_terms.push(ssl_loss(&mut tape, z, zp, zn, cfg.margin, cfg.ssl_loss_form)?);
        }
    }
    let loss = total_loss(
        &mut tape,
        out.logits,
        &labels,
        &ssl_terms,
        cfg.lambda,
        &vars.all(),
    )?;
    let grads = tape.backward(loss)?;
    stack.accumulate(&vars, &grads);
    Adam::new(cfg.gnn_lr).step(&mut stack.params_mut());
    Ok(grads.loss())
}

/// One Adam update of `stack` on a batch without the pretext loss.
pub fn train_step(
    ws: &Workspace,
    stack: &mut GnnStack,
    items: &[Item],
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    train_step_inner::<rand_chacha::ChaCha8Rng>(ws, stack, items, cfg, None)
}

/// Logits and attended embeddings for every item, batched in chunks of
/// `cfg.batch_size` in the given order.
pub fn predict(
    ws: &Workspace,
    stack: &GnnStack,
    items: &[Item],
    cfg: &TrainConfig,
) -> Result<Vec<(f64, Vec<f64>)>, TrainError> {
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(cfg.batch_size) {
        let mut tape = Tape::new();
        let vars = stack.bind(&mut tape)?;
        let inputs: Vec<(&GraphInput, usize)> = chunk
            .iter()
            .map(|it| Ok((ws.input(it.target, it.k)?, it.l)))
            .collect::<Result<_, TrainError>>()?;
        let fwd = forward_batch(&mut tape, &vars, &inputs, cfg.attention_slope)?;
        let z = tape.value(fwd.z);
        let logits = tape.value(fwd.logits);
        for i in 0..chunk.len() {
            out.push((logits.get(i, 0), z.row(i).to_vec()));
        }
    }
    Ok(out)
}

fn policy_items(ws: &Workspace, policy: &AgentPair, targets: &[usize]) -> Result<Vec<Item>, TrainError> {
    targets
        .iter()
        .map(|&t| {
            let (k, l) = policy.greedy(ws.state(t)?)?;
            Ok(Item { target: t, k, l })
        })
        .collect()
}

/// Fraction of `mask` classified correctly, each target embedded at the
/// policy's greedy width and depth. A positive logit predicts a bot.
pub fn evaluate(
    ws: &Workspace,
    stack: &GnnStack,
    policy: &AgentPair,
    mask: &[usize],
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    if mask.is_empty() {
        return Err(TrainError::Infeasible("evaluation mask is empty".into()));
    }
    let items = policy_items(ws, policy, mask)?;
    let preds = predict(ws, stack, &items, cfg)?;
    let mut pairs = Vec::with_capacity(items.len());
    for (it, (logit, _)) in items.iter().zip(preds) {
        pairs.push((logit > 0.0, ws.label(it.target)? > 0.5));
    }
    Ok(super::accuracy(&pairs))
}

/// Pre- and post-attention embeddings of `targets` at the policy's greedy
/// width and depth.
pub fn embed_targets(
    ws: &Workspace,
    stack: &GnnStack,
    policy: &AgentPair,
    targets: &[usize],
    cfg: &TrainConfig,
) -> Result<Vec<SubgraphEmbedding>, TrainError> {
    let items = policy_items(ws, policy, targets)?;
    let preds = predict(ws, stack, &items, cfg)?;
    let mut out = Vec::with_capacity(items.len());
    for (it, (_, z)) in items.iter().zip(preds) {
        let mut tape = Tape::new();
        let vars = stack.bind(&mut tape)?;
        let h = crate::gnn::forward_stack(&mut tape, &vars, ws.input(it.target, it.k)?, it.l)?;
        let zp = crate::gnn::readout(&mut tape, h)?;
        out.push(SubgraphEmbedding {
            target: it.target,
            z_pre: tape.value(zp).data().to_vec(),
            z,
        });
    }
    Ok(out)
}
