use rosgas_core::hetgraph::HetGraph;
use rosgas_core::rl::AgentPair;
use rosgas_core::synthgen::{generate, make_folds, SynthConfig};
use rosgas_core::trainer::{
    evaluate, final_retrain, layer_probe, predict, run_pipeline, run_training, Item, MetricsLog,
    TrainConfig, TrainError, Variant, Workspace,
};

fn graph() -> HetGraph {
    let s = generate(&SynthConfig {
        n_users: 400,
        labeled_fraction: 0.2,
        seed: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    let masks = make_folds(&s.graph, 5, 3).unwrap().remove(0);
    s.graph.with_masks(masks).unwrap()
}

fn quick(variant: Variant) -> TrainConfig {
    TrainConfig {
        variant,
        seed: 1,
        episodes: 2,
        steps_per_episode: Some(6),
        batch_size: 4,
        epochs: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn baseline_logs_only_epochs() {
    let g = graph();
    let cfg = quick(Variant::Baseline);
    let r = run_pipeline(&g, &cfg).unwrap();
    assert_eq!(r.log.steps().count(), 0);
    assert_eq!(r.log.epochs().count(), cfg.epochs);
    assert!(r.agents.width.is_none() && r.agents.depth.is_none());
    assert_eq!(r.summary.width_counts[1], g.targets().len());
    assert_eq!(r.summary.depth_counts[2], g.targets().len());
    assert!(r.summary.search_val_accuracy.is_none());
}

#[test]
fn one_step_stores_one_transition_per_agent() {
    let g = graph();
    let mut cfg = quick(Variant::KlNn);
    cfg.episodes = 1;
    cfg.steps_per_episode = Some(1);
    let ws = Workspace::new(&g, &cfg).unwrap();
    let out = run_training(&ws, &cfg).unwrap();
    assert_eq!(out.log.steps().count(), 1);
    let mut pair = out.agents;
    for agent in pair.agents_mut() {
        assert_eq!(agent.replay.len(), 1);
        assert_eq!(agent.memory.len(), 1);
        assert_eq!(agent.updates(), 1);
    }
}

#[test]
fn ablated_dimension_has_no_agent() {
    let g = graph();
    for (variant, width, depth) in [(Variant::K, true, false), (Variant::L, false, true)] {
        let cfg = quick(variant);
        let ws = Workspace::new(&g, &cfg).unwrap();
        let out = run_training(&ws, &cfg).unwrap();
        assert_eq!(out.agents.width.is_some(), width);
        assert_eq!(out.agents.depth.is_some(), depth);
        for s in out.log.steps() {
            if !width {
                assert_eq!(s.k, cfg.fixed_k);
            }
            if !depth {
                assert_eq!(s.l, cfg.fixed_l);
            }
        }
    }
}

#[test]
fn same_seed_same_run() {
    let g = graph();
    let cfg = quick(Variant::Full);
    let a = run_pipeline(&g, &cfg).unwrap();
    let b = run_pipeline(&g, &cfg).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.summary, b.summary);
    let mut other = cfg.clone();
    other.seed = 2;
    assert_ne!(run_pipeline(&g, &other).unwrap().log, a.log);
}

#[test]
fn step_log_columns_are_in_range() {
    let g = graph();
    let r = run_pipeline(&g, &quick(Variant::Full)).unwrap();
    assert_eq!(r.log.steps().count(), 12);
    for s in r.log.steps() {
        assert!(s.reward == 1.0 || s.reward == -1.0);
        assert!((0.0..=1.0).contains(&s.val_accuracy));
        assert!((1..=2).contains(&s.k) && (1..=3).contains(&s.l));
    }
}

#[test]
fn evaluate_agrees_with_prediction_signs() {
    let g = graph();
    let cfg = quick(Variant::Baseline);
    let ws = Workspace::new(&g, &cfg).unwrap();
    let policy = AgentPair::fixed(1, 2);
    let stack = final_retrain(&ws, &cfg, &policy, &mut MetricsLog::new()).unwrap();
    let test = ws.graph().masks().test.clone();
    let items: Vec<Item> = test.iter().map(|&t| Item { target: t, k: 1, l: 2 }).collect();
    let preds = predict(&ws, &stack, &items, &cfg).unwrap();
    let (mut tp, mut tn) = (0, 0);
    for (&t, (logit, _)) in test.iter().zip(&preds) {
        let bot = ws.graph().label(t) == Some(1);
        match (*logit > 0.0, bot) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    let expected = (tp + tn) as f64 / test.len() as f64;
    assert_eq!(evaluate(&ws, &stack, &policy, &test, &cfg).unwrap(), expected);
}

#[test]
fn single_run_probe_ratios_are_binary() {
    let g = graph();
    let cfg = quick(Variant::Baseline);
    let ws = Workspace::new(&g, &cfg).unwrap();
    let targets: Vec<usize> = ws.graph().masks().test.iter().copied().take(5).collect();
    let rows = layer_probe(&ws, &cfg, &AgentPair::fixed(1, 2), &targets, 1).unwrap();
    assert_eq!(rows.len(), targets.len());
    for row in rows {
        assert_eq!(row.ratios.len(), 3);
        assert!(row.ratios.iter().all(|&r| r == 0.0 || r == 1.0));
        assert_eq!(row.agent_choice, 2);
        let best = row.ratios.iter().copied().fold(0.0, f64::max);
        assert_eq!(row.matched, row.ratios[1] == best);
    }
}

#[test]
fn search_without_validation_is_infeasible() {
    let mut g = graph();
    let mut masks = g.masks().clone();
    masks.train.append(&mut masks.val);
    masks.train.sort_unstable();
    g.set_masks(masks).unwrap();
    let cfg = quick(Variant::Kl);
    let ws = Workspace::new(&g, &cfg).unwrap();
    assert!(matches!(run_training(&ws, &cfg), Err(TrainError::Infeasible(_))));
    assert!(run_training(&ws, &quick(Variant::Baseline)).is_ok());
}

#[test]
fn ssl_without_second_width_is_infeasible() {
    let mut cfg = quick(Variant::Full);
    cfg.agent.k_max = 1;
    assert!(matches!(run_pipeline(&graph(), &cfg), Err(TrainError::Infeasible(_))));
}
