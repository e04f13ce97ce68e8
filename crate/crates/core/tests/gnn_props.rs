use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rosgas_core::gnn::{
    attention_aggregate, embed_single, forward_batch, forward_stack, overlap_mask, readout,
    ssl_loss, total_loss, GnnConfig, GnnStack, GraphInput, SslLossForm,
};
use rosgas_core::hetgraph::{
    build_graph, extract_subgraph, EdgeSpec, EdgeType, HetGraph, NodeSpec, NodeType, Subgraph,
};
use rosgas_core::numcore::{Tape, Tensor};

fn fixture(dim: usize, seed: u64) -> HetGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types = [
        NodeType::User,
        NodeType::User,
        NodeType::User,
        NodeType::Tweet,
        NodeType::Tweet,
        NodeType::Hashtag,
    ];
    let nodes: Vec<NodeSpec> = types
        .iter()
        .enumerate()
        .map(|(i, &t)| NodeSpec {
            id: i as u64,
            node_type: t,
            features: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect();
    let e = |src, dst, rel| EdgeSpec { src, dst, rel };
    let edges = [
        e(0, 1, EdgeType::Follow),
        e(1, 2, EdgeType::Follow),
        e(0, 3, EdgeType::Post),
        e(2, 4, EdgeType::Post),
        e(3, 5, EdgeType::Contain),
        e(4, 5, EdgeType::Contain),
        e(1, 4, EdgeType::Retweet),
    ];
    build_graph(&nodes, &edges, &[(0, 1), (1, 0), (2, 1)]).unwrap()
}

fn small_stack(in_dim: usize, hidden: usize, seed: u64) -> GnnStack {
    let cfg = GnnConfig {
        in_dim,
        hidden,
        max_layers: 3,
        heads: 2,
        classifier_hidden: 3,
        attention_slope: 0.2,
    };
    GnnStack::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn input(g: &HetGraph, center: usize, k: usize) -> GraphInput {
    GraphInput::from_subgraph(&extract_subgraph(g, center, k).unwrap()).unwrap()
}

/// Batch BCE + triplet terms + norm penalty over two anchors.
fn composite(stack: &GnnStack, g: &HetGraph, backward: bool) -> (f64, Vec<Tensor>) {
    let a = input(g, 0, 1);
    let b = input(g, 2, 1);
    let a_pos = input(g, 0, 2);
    let b_pos = input(g, 2, 2);
    let mut tape = Tape::new();
    let vars = stack.bind(&mut tape).unwrap();
    let out = forward_batch(&mut tape, &vars, &[(&a, 2), (&b, 3)], 0.2).unwrap();
    let mut terms = Vec::new();
    for (i, (pos, neg, l)) in [(&a_pos, &b, 2), (&b_pos, &a, 3)].into_iter().enumerate() {
        let z = tape.slice_rows(out.z, i, 1).unwrap();
        let zp = embed_single(&mut tape, &vars, pos, l, 0.2).unwrap();
        let zn = embed_single(&mut tape, &vars, neg, l, 0.2).unwrap();
        terms.push(ssl_loss(&mut tape, z, zp, zn, 0.1, SslLossForm::AsPrinted).unwrap());
    }
    let loss = total_loss(&mut tape, out.logits, &[1.0, 1.0], &terms, 0.01, &vars.all()).unwrap();
    let value = tape.value(loss).item();
    if !backward {
        return (value, Vec::new());
    }
    let grads = tape.backward(loss).unwrap();
    let mut s = stack.clone();
    s.zero_grad();
    s.accumulate(&vars, &grads);
    (value, s.gradients())
}

#[test]
fn composite_gradient_matches_central_differences() {
    let g = fixture(4, 1);
    let stack = small_stack(4, 5, 3);
    let (_, analytic) = composite(&stack, &g, true);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (pi, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let mut plus = stack.clone();
            plus.params_mut()[pi].value.data_mut()[j] += h;
            let mut minus = stack.clone();
            minus.params_mut()[pi].value.data_mut()[j] -= h;
            let fd = (composite(&plus, &g, false).0 - composite(&minus, &g, false).0) / (2.0 * h);
            let a = grad.data()[j];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-4, "max relative error {worst}");
}

#[test]
fn depth_uses_prefix_of_shared_layers() {
    let g = fixture(4, 2);
    let inp = input(&g, 0, 2);
    let stack = small_stack(4, 5, 4);
    let run = |s: &GnnStack, l: usize| {
        let mut tape = Tape::new();
        let vars = s.bind(&mut tape).unwrap();
        let h = forward_stack(&mut tape, &vars, &inp, l).unwrap();
        tape.value(h).clone()
    };
    let mut perturbed = stack.clone();
    perturbed.layers[2].value.fill(7.0);
    assert_eq!(run(&stack, 2), run(&perturbed, 2));
    assert_ne!(run(&stack, 3), run(&perturbed, 3));

    // Straight-line recomputation of depth 2.
    let a = inp.adjacency.to_dense();
    let x = &inp.features;
    let relu = |t: Tensor| t.map(|v| v.max(0.0));
    let h1 = relu(a.matmul(&x.matmul(&stack.layers[0].value).unwrap()).unwrap());
    let mut h2 = relu(a.matmul(&h1.matmul(&stack.layers[1].value).unwrap()).unwrap());
    h2.add_assign(&x.matmul(&stack.residual.value).unwrap());
    assert!(run(&stack, 2).max_abs_diff(&h2) < 1e-12);
}

fn permuted(sub: &Subgraph, perm: &[usize]) -> Subgraph {
    // perm maps old local index -> new local index; the center stays at 0.
    let n = sub.len();
    let mut nodes = vec![0; n];
    let mut rows = vec![Vec::new(); n];
    for old in 0..n {
        nodes[perm[old]] = sub.nodes[old];
        rows[perm[old]] = sub.features.row(old).to_vec();
    }
    Subgraph {
        center: sub.center,
        width: sub.width,
        nodes,
        edges: sub.edges.iter().map(|&(a, b, r)| (perm[a], perm[b], r)).collect(),
        features: Tensor::from_rows(&rows).unwrap(),
    }
}

#[test]
fn readout_is_permutation_invariant() {
    let g = fixture(4, 5);
    let sub = extract_subgraph(&g, 0, 3).unwrap();
    let stack = small_stack(4, 5, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let embed = |s: &Subgraph| {
        let inp = GraphInput::from_subgraph(s).unwrap();
        let mut tape = Tape::new();
        let vars = stack.bind(&mut tape).unwrap();
        let h = forward_stack(&mut tape, &vars, &inp, 3).unwrap();
        let z = readout(&mut tape, h).unwrap();
        tape.value(z).clone()
    };
    let base = embed(&sub);
    for _ in 0..10 {
        let mut tail: Vec<usize> = (1..sub.len()).collect();
        rand::seq::SliceRandom::shuffle(tail.as_mut_slice(), &mut rng);
        let mut perm = vec![0];
        perm.extend(tail);
        assert!(embed(&permuted(&sub, &perm)).max_abs_diff(&base) < 1e-12);
    }
}

#[test]
fn attention_rows_are_distributions_over_overlaps() {
    let g = fixture(4, 8);
    let stack = small_stack(4, 5, 9);
    let inputs = [input(&g, 0, 1), input(&g, 1, 1), input(&g, 2, 1), input(&g, 0, 2)];
    let members: Vec<&[usize]> = inputs.iter().map(|i| i.members.as_slice()).collect();
    let mask = overlap_mask(&members);
    let mut tape = Tape::new();
    let vars = stack.bind(&mut tape).unwrap();
    let rows: Vec<_> = inputs
        .iter()
        .map(|inp| {
            let h = forward_stack(&mut tape, &vars, inp, 1).unwrap();
            readout(&mut tape, h).unwrap()
        })
        .collect();
    let z = tape.row_concat(&rows).unwrap();
    let att = attention_aggregate(&mut tape, &vars, z, &mask, 0.2).unwrap();
    let n = inputs.len();
    for alpha in &att.alphas {
        let a = tape.value(*alpha);
        for i in 0..n {
            let s: f64 = (0..n).map(|j| a.get(i, j)).sum();
            assert!((s - 1.0).abs() < 1e-12);
            for j in 0..n {
                if !mask[i * n + j] {
                    assert_eq!(a.get(i, j), 0.0);
                }
            }
        }
    }
}

#[test]
fn singleton_attention_is_head_average() {
    let g = fixture(4, 10);
    let stack = small_stack(4, 5, 11);
    let inp = input(&g, 0, 1);
    let mut tape = Tape::new();
    let vars = stack.bind(&mut tape).unwrap();
    let h = forward_stack(&mut tape, &vars, &inp, 1).unwrap();
    let z_pre = readout(&mut tape, h).unwrap();
    let zp = tape.value(z_pre).clone();
    let z = embed_single(&mut tape, &vars, &inp, 1, 0.2).unwrap();
    let mut expected = Tensor::zeros(1, 5);
    for head in &stack.heads {
        expected.add_assign(&zp.matmul(&head.w.value).unwrap());
    }
    let expected = expected.map(|v| v / stack.heads.len() as f64);
    assert!(tape.value(z).max_abs_diff(&expected) < 1e-12);
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3)
}

proptest! {
    #[test]
    fn triplet_loss_is_bounded(z in vec3(), p in vec3(), n in vec3(), margin in 0.0f64..1.0) {
        for form in [SslLossForm::AsPrinted, SslLossForm::StandardHinge] {
            let mut tape = Tape::new();
            let z = tape.constant(Tensor::row_vector(&z)).unwrap();
            let p = tape.constant(Tensor::row_vector(&p)).unwrap();
            let n = tape.constant(Tensor::row_vector(&n)).unwrap();
            let out = ssl_loss(&mut tape, z, p, n, margin, form).unwrap();
            let v = tape.value(out).item();
            match form {
                SslLossForm::AsPrinted => prop_assert!((-(1.0 + margin)..=0.0).contains(&v)),
                SslLossForm::StandardHinge => prop_assert!((0.0..=1.0 + margin).contains(&v)),
            }
        }
    }
}
