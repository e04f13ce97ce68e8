use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GnnError;
use crate::hetgraph::Subgraph;
use crate::numcore::{CsrMatrix, Gradients, NumError, Param, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnConfig {
    pub in_dim: usize,
    pub hidden: usize,
    pub max_layers: usize,
    pub heads: usize,
    pub classifier_hidden: usize,
    pub attention_slope: f64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            in_dim: 16,
            hidden: 64,
            max_layers: 3,
            heads: 2,
            classifier_hidden: 32,
            attention_slope: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionHead {
    pub w: Param,
    /// Scoring vector over `[W z_i ‖ W z_j]`, stored as a `2h×1` column.
    pub a: Param,
}

/// Shared pool of GCN layers plus residual projection, attention heads, and
/// the two-layer classifier.
///
/// A depth-`l` model is the first `l` layers of the pool in initialization
/// order, so every depth action trains the same weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnStack {
    cfg: GnnConfig,
    pub layers: Vec<Param>,
    pub residual: Param,
    pub heads: Vec<AttentionHead>,
    pub cls_w1: Param,
    pub cls_b1: Param,
    pub cls_w2: Param,
    pub cls_b2: Param,
}

/// Tape handles for every parameter of a [`GnnStack`].
#[derive(Clone, Debug)]
pub struct StackVars {
    pub layers: Vec<Var>,
    pub residual: Var,
    pub heads: Vec<(Var, Var)>,
    pub cls_w1: Var,
    pub cls_b1: Var,
    pub cls_w2: Var,
    pub cls_b2: Var,
}

impl StackVars {
    pub fn all(&self) -> Vec<Var> {
        let mut v = self.layers.clone();
        v.push(self.residual);
        for &(w, a) in &self.heads {
            v.push(w);
            v.push(a);
        }
        v.extend([self.cls_w1, self.cls_b1, self.cls_w2, self.cls_b2]);
        v
    }
}

/// Subgraph data prepared for convolution: normalized adjacency, raw
/// features, and the sorted member set used for overlap tests.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub adjacency: Arc<CsrMatrix>,
    pub features: Tensor,
    pub members: Vec<usize>,
}

impl GraphInput {
    pub fn from_subgraph(sub: &Subgraph) -> Result<Self, GnnError> {
        let mut members = sub.nodes.clone();
        members.sort_unstable();
        Ok(Self {
            adjacency: Arc::new(normalize_adjacency(sub)?),
            features: sub.features.clone(),
            members,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }
}

/// Symmetric GCN normalization `D̃^{-1/2}(A + I)D̃^{-1/2}` of the subgraph's
/// undirected, relation-agnostic adjacency.
pub fn normalize_adjacency(sub: &Subgraph) -> Result<CsrMatrix, GnnError> {
    let n = sub.len();
    if n == 0 {
        return Err(GnnError::EmptySubgraph);
    }
    let adj = sub.undirected_adjacency();
    let deg: Vec<f64> = adj.iter().map(|l| (l.len() + 1) as f64).collect();
    let mut triplets = Vec::with_capacity(n + adj.iter().map(Vec::len).sum::<usize>());
    for (i, list) in adj.iter().enumerate() {
        triplets.push((i, i, 1.0 / deg[i]));
        for &j in list {
            triplets.push((i, j, 1.0 / (deg[i] * deg[j]).sqrt()));
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, &triplets)?)
}

impl GnnStack {
    pub fn new<R: Rng + ?Sized>(cfg: GnnConfig, rng: &mut R) -> Result<Self, GnnError> {
        if cfg.max_layers == 0 || cfg.heads == 0 || cfg.in_dim == 0 || cfg.hidden == 0 {
            return Err(GnnError::InvalidConfig(
                "in_dim, hidden, max_layers and heads must be positive".into(),
            ));
        }
        let h = cfg.hidden;
        let layers = (0..cfg.max_layers)
            .map(|i| Param::glorot(if i == 0 { cfg.in_dim } else { h }, h, rng))
            .collect();
        let residual = Param::glorot(cfg.in_dim, h, rng);
        let heads = (0..cfg.heads)
            .map(|_| AttentionHead {
                w: Param::glorot(h, h, rng),
                a: Param::glorot(2 * h, 1, rng),
            })
            .collect();
        let cls_w1 = Param::glorot(h, cfg.classifier_hidden, rng);
        let cls_b1 = Param::zeros(1, cfg.classifier_hidden);
        let cls_w2 = Param::glorot(cfg.classifier_hidden, 1, rng);
        let cls_b2 = Param::zeros(1, 1);
        Ok(Self {
            cfg,
            layers,
            residual,
            heads,
            cls_w1,
            cls_b1,
            cls_w2,
            cls_b2,
        })
    }

    pub fn config(&self) -> &GnnConfig {
        &self.cfg
    }

    pub fn max_layers(&self) -> usize {
        self.layers.len()
    }

    /// Parameters with stable names, in a fixed order.
    pub fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out: Vec<(String, &Param)> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("gcn.{i}.weight"), p))
            .collect();
        out.push(("residual.weight".into(), &self.residual));
        for (k, head) in self.heads.iter().enumerate() {
            out.push((format!("attention.{k}.weight"), &head.w));
            out.push((format!("attention.{k}.score"), &head.a));
        }
        out.push(("classifier.0.weight".into(), &self.cls_w1));
        out.push(("classifier.0.bias".into(), &self.cls_b1));
        out.push(("classifier.1.weight".into(), &self.cls_w2));
        out.push(("classifier.1.bias".into(), &self.cls_b2));
        out
    }

    /// Same order as [`Self::named_params`] and [`StackVars::all`].
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.layers.iter_mut().collect();
        out.push(&mut self.residual);
        for head in &mut self.heads {
            out.push(&mut head.w);
            out.push(&mut head.a);
        }
        out.extend([
            &mut self.cls_w1,
            &mut self.cls_b1,
            &mut self.cls_w2,
            &mut self.cls_b2,
        ]);
        out
    }

    /// Overwrites one named parameter; the shape must match.
    pub fn load_param(&mut self, name: &str, value: Tensor) -> Result<(), GnnError> {
        let idx = self
            .named_params()
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| GnnError::UnknownParam(name.to_string()))?;
        let p = self.params_mut().swap_remove(idx);
        if p.shape() != value.shape() {
            return Err(GnnError::ParamShape {
                name: name.to_string(),
                expected: p.shape(),
                found: value.shape(),
            });
        }
        p.reset_to(value)?;
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<StackVars, NumError> {
        let layers = self
            .layers
            .iter()
            .map(|p| tape.param(p))
            .collect::<Result<_, _>>()?;
        let residual = tape.param(&self.residual)?;
        let heads = self
            .heads
            .iter()
            .map(|h| Ok((tape.param(&h.w)?, tape.param(&h.a)?)))
            .collect::<Result<_, NumError>>()?;
        Ok(StackVars {
            layers,
            residual,
            heads,
            cls_w1: tape.param(&self.cls_w1)?,
            cls_b1: tape.param(&self.cls_b1)?,
            cls_w2: tape.param(&self.cls_w2)?,
            cls_b2: tape.param(&self.cls_b2)?,
        })
    }

    /// Routes gradients from a backward pass into each parameter.
    pub fn accumulate(&mut self, vars: &StackVars, grads: &Gradients) {
        for (p, v) in self.params_mut().into_iter().zip(vars.all()) {
            grads.accumulate(v, p);
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Snapshot of every gradient, in parameter order.
    pub fn gradients(&self) -> Vec<Tensor> {
        self.named_params().into_iter().map(|(_, p)| p.grad.clone()).collect()
    }
}

/// Per-node embeddings of a depth-`l` model: `l` rounds of
/// `H ← ReLU(Â H W)` over the first `l` shared layers, then the residual
/// `H ← H + X P` on every node.
pub fn forward_stack(
    tape: &mut Tape,
    vars: &StackVars,
    input: &GraphInput,
    l: usize,
) -> Result<Var, GnnError> {
    if l == 0 || l > vars.layers.len() {
        return Err(GnnError::LayerOutOfRange {
            requested: l,
            max: vars.layers.len(),
        });
    }
    let x = tape.constant(input.features.clone())?;
    let mut h = x;
    for &w in &vars.layers[..l] {
        let hw = tape.matmul(h, w)?;
        let agg = tape.spmm(&input.adjacency, hw)?;
        h = tape.relu(agg)?;
    }
    let res = tape.matmul(x, vars.residual)?;
    Ok(tape.add(h, res)?)
}

/// Mean over node rows.
pub fn readout(tape: &mut Tape, h: Var) -> Result<Var, GnnError> {
    Ok(tape.mean_rows(h)?)
}

/// Two-layer classifier producing one logit per row of `z`.
pub fn classify(tape: &mut Tape, vars: &StackVars, z: Var) -> Result<Var, GnnError> {
    let h = tape.matmul(z, vars.cls_w1)?;
    let h = tape.add_row(h, vars.cls_b1)?;
    let h = tape.relu(h)?;
    let o = tape.matmul(h, vars.cls_w2)?;
    Ok(tape.add_row(o, vars.cls_b2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{build_graph, extract_subgraph, EdgeSpec, EdgeType, NodeSpec, NodeType};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair_subgraph() -> Subgraph {
        let nodes: Vec<NodeSpec> = (0..2)
            .map(|id| NodeSpec {
                id,
                node_type: NodeType::User,
                features: vec![1.0, 2.0],
            })
            .collect();
        let g = build_graph(
            &nodes,
            &[EdgeSpec { src: 0, dst: 1, rel: EdgeType::Follow }],
            &[],
        )
        .unwrap();
        extract_subgraph(&g, 0, 1).unwrap()
    }

    #[test]
    fn two_node_adjacency_is_half() {
        let a = normalize_adjacency(&pair_subgraph()).unwrap().to_dense();
        assert_eq!(a.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn single_node_adjacency_is_one() {
        let mut s = pair_subgraph();
        s.nodes.truncate(1);
        s.edges.clear();
        let a = normalize_adjacency(&s).unwrap().to_dense();
        assert_eq!(a.data(), &[1.0]);
    }

    fn tiny_stack(in_dim: usize) -> GnnStack {
        let cfg = GnnConfig {
            in_dim,
            hidden: 2,
            max_layers: 2,
            heads: 1,
            classifier_hidden: 2,
            attention_slope: 0.2,
        };
        GnnStack::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_embeddings() {
        let mut stack = tiny_stack(2);
        for p in stack.params_mut() {
            p.value.fill(0.0);
        }
        let input = GraphInput::from_subgraph(&pair_subgraph()).unwrap();
        let mut tape = Tape::new();
        let vars = stack.bind(&mut tape).unwrap();
        let h = forward_stack(&mut tape, &vars, &input, 2).unwrap();
        assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
        let z = readout(&mut tape, h).unwrap();
        let logit = classify(&mut tape, &vars, z).unwrap();
        assert_eq!(tape.value(logit).item(), 0.0);
    }

    #[test]
    fn single_node_hand_arithmetic() {
        // x = (1, -2), W = I, P = [[0.5, 0], [0, 0.5]], Â = [[1]]:
        // ReLU(x W) + x P = (1, 0) + (0.5, -1) = (1.5, -1).
        let mut stack = tiny_stack(2);
        stack.layers[0].value = Tensor::identity(2);
        stack.residual.value = Tensor::from_vec(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let mut s = pair_subgraph();
        s.nodes.truncate(1);
        s.edges.clear();
        s.features = Tensor::row_vector(&[1.0, -2.0]);
        let input = GraphInput::from_subgraph(&s).unwrap();
        let mut tape = Tape::new();
        let vars = stack.bind(&mut tape).unwrap();
        let h = forward_stack(&mut tape, &vars, &input, 1).unwrap();
        assert_eq!(tape.value(h).data(), &[1.5, -1.0]);
    }

    #[test]
    fn layer_count_checked() {
        let stack = tiny_stack(2);
        let input = GraphInput::from_subgraph(&pair_subgraph()).unwrap();
        let mut tape = Tape::new();
        let vars = stack.bind(&mut tape).unwrap();
        for l in [0, 3] {
            assert!(matches!(
                forward_stack(&mut tape, &vars, &input, l),
                Err(GnnError::LayerOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn readout_is_mean() {
        let mut tape = Tape::new();
        let h = tape
            .constant(Tensor::from_vec(2, 2, vec![0.0, 2.0, 2.0, 0.0]).unwrap())
            .unwrap();
        let z = readout(&mut tape, h).unwrap();
        assert_eq!(tape.value(z).data(), &[1.0, 1.0]);
    }

    #[test]
    fn bias_raises_logit() {
        let mut stack = tiny_stack(2);
        let z = Tensor::row_vector(&[0.3, -0.7]);
        let logit = |stack: &GnnStack| {
            let mut tape = Tape::new();
            let vars = stack.bind(&mut tape).unwrap();
            let zv = tape.constant(z.clone()).unwrap();
            let o = classify(&mut tape, &vars, zv).unwrap();
            tape.value(o).item()
        };
        let before = logit(&stack);
        stack.cls_b2.value.data_mut()[0] += 0.25;
        assert!((logit(&stack) - before - 0.25).abs() < 1e-12);
    }

    #[test]
    fn load_param_rejects_wrong_shape() {
        let mut stack = tiny_stack(2);
        assert!(matches!(
            stack.load_param("gcn.0.weight", Tensor::zeros(3, 3)),
            Err(GnnError::ParamShape { .. })
        ));
        assert!(matches!(
            stack.load_param("nope", Tensor::zeros(1, 1)),
            Err(GnnError::UnknownParam(_))
        ));
        stack.load_param("gcn.0.weight", Tensor::identity(2)).unwrap();
        assert_eq!(stack.layers[0].value, Tensor::identity(2));
    }
}
