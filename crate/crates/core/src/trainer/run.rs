use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::batch::{predict, train_step_inner, Item, SslContext};
use super::log::{EpochRecord, MetricRecord, MetricsLog, StepRecord};
use super::{evaluate, stream_rng, Stream, TrainConfig, TrainError, Variant, Workspace};
use crate::gnn::GnnStack;
use crate::hetgraph::{transition_distribution, HetGraph};
use crate::rl::{binary_reward, reward_measure, AgentPair, Transition};

/// `(TP + TN) / N` over `(predicted, actual)` pairs; `0` when empty.
pub fn accuracy(pairs: &[(bool, bool)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let correct = pairs.iter().filter(|(p, a)| p == a).count();
    correct as f64 / pairs.len() as f64
}

/// Pending items bucketed by depth. A bucket is handed back for training as
/// soon as it holds `threshold` items.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingBuffer {
    threshold: usize,
    buckets: Vec<Vec<Item>>,
}

impl EmbeddingBuffer {
    pub fn new(max_depth: usize, threshold: usize) -> Self {
        Self {
            threshold: threshold.max(1),
            buckets: vec![Vec::new(); max_depth],
        }
    }

    /// Adds an item to its depth's bucket and returns the bucket's contents
    /// when it reaches the threshold.
    pub fn push(&mut self, item: Item) -> Option<Vec<Item>> {
        let bucket = &mut self.buckets[item.l - 1];
        bucket.push(item);
        if bucket.len() >= self.threshold {
            Some(std::mem::take(bucket))
        } else {
            None
        }
    }

    pub fn bucket_len(&self, l: usize) -> usize {
        self.buckets[l - 1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.iter().all(Vec::is_empty)
    }

    /// Empties every non-empty bucket, shallowest first.
    pub fn drain(&mut self) -> Vec<Vec<Item>> {
        self.buckets
            .iter_mut()
            .filter(|b| !b.is_empty())
            .map(std::mem::take)
            .collect()
    }
}

/// Result of the search phase.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub stack: GnnStack,
    pub agents: AgentPair,
    pub log: MetricsLog,
}

/// Per-run figures written to the summary file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: Variant,
    pub seed: u64,
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    /// Validation accuracy of the search-phase model, before retraining.
    pub search_val_accuracy: Option<f64>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Greedy width counts over all targets, index `k − 1`.
    pub width_counts: Vec<usize>,
    /// Greedy depth counts over all targets, index `l − 1`.
    pub depth_counts: Vec<usize>,
}

/// Everything a complete run produces.
pub struct RunResult {
    pub workspace: Workspace,
    pub stack: GnnStack,
    pub agents: AgentPair,
    pub log: MetricsLog,
    pub summary: Summary,
}

fn flush<R: Rng>(
    ws: &Workspace,
    stack: &mut GnnStack,
    items: &[Item],
    cfg: &TrainConfig,
    pool: &[usize],
    ssl_rng: &mut R,
) -> Result<f64, TrainError> {
    let steps = cfg.flush_steps.max(1);
    let mut total = 0.0;
    for _ in 0..steps {
        let ssl = cfg.variant.uses_ssl().then(|| SslContext {
            pool,
            rng: &mut *ssl_rng,
        });
        total += train_step_inner(ws, stack, items, cfg, ssl)?;
    }
    Ok(total / steps as f64)
}

fn check_masks(ws: &Workspace, cfg: &TrainConfig) -> Result<(), TrainError> {
    let masks = ws.graph().masks();
    if masks.train.len() < 2 {
        return Err(TrainError::Infeasible(format!(
            "{} training targets; need at least 2",
            masks.train.len()
        )));
    }
    if cfg.variant.uses_rl() && masks.val.is_empty() {
        return Err(TrainError::Infeasible(
            "the search needs a non-empty validation mask".into(),
        ));
    }
    Ok(())
}

/// Runs the search phase. Without searched dimensions this is plain
/// full-pass training at the fixed width and depth, logged per epoch.
///
/// Each step: both agents pick a width and depth for the current training
/// target; the item joins its depth's buffer, and a full buffer trains the
/// stack. The step's action is then scored by validation-probe accuracy,
/// the windowed measure and binary reward follow, the next target is drawn
/// from the walk-count distribution of the current subgraph, and each agent
/// stores its transition and runs its DQN updates. Leftover buffered items
/// are trained on once the last episode ends.
pub fn run_training(ws: &Workspace, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    check_masks(ws, cfg)?;
    if !cfg.variant.uses_rl() {
        let agents = AgentPair::fixed(cfg.fixed_k, cfg.fixed_l);
        let mut log = MetricsLog::new();
        let stack = final_retrain(ws, cfg, &agents, &mut log)?;
        return Ok(TrainOutcome { stack, agents, log });
    }

    let g = ws.graph();
    let train = g.masks().train.clone();
    let mut probe = g.masks().val.clone();
    probe.shuffle(&mut stream_rng(cfg.seed, Stream::Probe));
    probe.truncate(cfg.val_probe);
    probe.sort_unstable();

    let steps_per_episode = cfg
        .steps_per_episode
        .unwrap_or_else(|| (train.len() / 4).max(1));
    let total_steps = cfg.episodes * steps_per_episode;
    let d = g.feature_dim();

    let mut stack = GnnStack::new(cfg.gnn_config(d), &mut stream_rng(cfg.seed, Stream::GnnInit))?;
    let mut agents = AgentPair::new(
        d,
        &cfg.agent,
        cfg.variant.searches_width(),
        cfg.variant.searches_depth(),
        cfg.variant.uses_nn(),
        cfg.fixed_k,
        cfg.fixed_l,
        &mut stream_rng(cfg.seed, Stream::AgentInit),
    )?;
    let mut explore = stream_rng(cfg.seed, Stream::Explore);
    let mut env = stream_rng(cfg.seed, Stream::Env);
    let mut replay_rng = stream_rng(cfg.seed, Stream::Replay);
    let mut ssl_rng = stream_rng(cfg.seed, Stream::Ssl);

    let mut buffer = EmbeddingBuffer::new(stack.max_layers(), cfg.batch_size);
    let mut history: Vec<f64> = Vec::with_capacity(total_steps);
    let mut measure_prev = 0.0;
    let mut probe_memo: HashMap<(usize, usize), f64> = HashMap::new();
    let mut jumps: HashMap<(usize, usize), WeightedIndex<f64>> = HashMap::new();
    let mut log = MetricsLog::new();
    let mut global = 0;

    for episode in 0..cfg.episodes {
        let mut target = train[env.gen_range(0..train.len())];
        for step in 0..steps_per_episode {
            let state = ws.state(target)?.to_vec();
            let eps = cfg.agent.epsilon_at(global, total_steps);
            let (k, l) = agents.act(&state, eps, &mut explore)?;

            let mut gnn_loss = None;
            if let Some(items) = buffer.push(Item { target, k, l }) {
                gnn_loss = Some(flush(ws, &mut stack, &items, cfg, &train, &mut ssl_rng)?);
                probe_memo.clear();
            }

            let acc = match probe_memo.get(&(k, l)) {
                Some(&a) => a,
                None => {
                    let a = probe_accuracy(ws, &stack, &probe, k, l, cfg)?;
                    probe_memo.insert((k, l), a);
                    a
                }
            };
            let measure = reward_measure(
                &history,
                acc,
                cfg.agent.reward_window,
                cfg.agent.reward_mean_form,
            );
            history.push(acc);
            let reward = binary_reward(measure, measure_prev);
            measure_prev = measure;

            let jump = match jumps.get(&(target, k)) {
                Some(w) => w,
                None => {
                    let dist = transition_distribution(ws.subgraph(target, k)?, &train)?;
                    let w = WeightedIndex::new(&dist).map_err(|e| {
                        TrainError::Infeasible(format!("transition weights: {e}"))
                    })?;
                    jumps.entry((target, k)).or_insert(w)
                }
            };
            let next = train[jump.sample(&mut env)];
            let next_state = ws.state(next)?.to_vec();

            let mut losses = [None, None];
            for (slot, (agent, action)) in [(agents.width.as_mut(), k), (agents.depth.as_mut(), l)]
                .into_iter()
                .enumerate()
            {
                if let Some(agent) = agent {
                    agent.observe(Transition {
                        state: state.clone(),
                        action: action - 1,
                        next_state: next_state.clone(),
                        reward,
                    })?;
                    losses[slot] = agent.train(episode, &mut replay_rng)?;
                }
            }

            log.push(MetricRecord::Step(StepRecord {
                episode,
                step,
                target: g.external_id(target),
                k,
                l,
                val_accuracy: acc,
                measure,
                reward,
                width_loss: losses[0],
                depth_loss: losses[1],
                gnn_loss,
            }));
            target = next;
            global += 1;
        }
    }
    for items in buffer.drain() {
        flush(ws, &mut stack, &items, cfg, &train, &mut ssl_rng)?;
    }
    Ok(TrainOutcome { stack, agents, log })
}

fn probe_accuracy(
    ws: &Workspace,
    stack: &GnnStack,
    probe: &[usize],
    k: usize,
    l: usize,
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    let items: Vec<Item> = probe.iter().map(|&t| Item { target: t, k, l }).collect();
    let preds = predict(ws, stack, &items, cfg)?;
    let mut pairs = Vec::with_capacity(items.len());
    for (it, (logit, _)) in items.iter().zip(preds) {
        pairs.push((logit > 0.0, ws.label(it.target)? > 0.5));
    }
    Ok(accuracy(&pairs))
}

/// Trains a fresh stack for `cfg.epochs` epochs over the training targets,
/// each embedded at the policy's greedy width and depth. Epoch losses are
/// appended to `log`.
pub fn final_retrain(
    ws: &Workspace,
    cfg: &TrainConfig,
    policy: &AgentPair,
    log: &mut MetricsLog,
) -> Result<GnnStack, TrainError> {
    let mut rng = stream_rng(cfg.seed, Stream::Retrain);
    let mut ssl_rng = stream_rng(cfg.seed, Stream::Ssl);
    let mut stack = GnnStack::new(cfg.gnn_config(ws.graph().feature_dim()), &mut rng)?;
    let train = ws.graph().masks().train.clone();
    let mut items: Vec<Item> = train
        .iter()
        .map(|&t| {
            let (k, l) = policy.greedy(ws.state(t)?)?;
            Ok(Item { target: t, k, l })
        })
        .collect::<Result<_, TrainError>>()?;
    for epoch in 0..cfg.epochs {
        items.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in items.chunks(cfg.batch_size) {
            let ssl = cfg.variant.uses_ssl().then(|| SslContext {
                pool: &train,
                rng: &mut ssl_rng,
            });
            total += train_step_inner(ws, &mut stack, chunk, cfg, ssl)?;
            batches += 1;
        }
        log.push(MetricRecord::Epoch(EpochRecord {
            epoch,
            gnn_loss: total / batches.max(1) as f64,
        }));
    }
    Ok(stack)
}

/// Search, retrain, and evaluate on the test mask of `g`.
pub fn run_pipeline(g: &HetGraph, cfg: &TrainConfig) -> Result<RunResult, TrainError> {
    cfg.validate()?;
    let ws = Workspace::new(g, cfg)?;
    check_masks(&ws, cfg)?;
    let masks = ws.graph().masks().clone();
    if masks.test.is_empty() {
        return Err(TrainError::Infeasible("test mask is empty".into()));
    }
    let TrainOutcome {
        stack,
        agents,
        mut log,
    } = run_training(&ws, cfg)?;
    let (stack, search_val) = if cfg.variant.uses_rl() {
        let search_val = evaluate(&ws, &stack, &agents, &masks.val, cfg)?;
        (final_retrain(&ws, cfg, &agents, &mut log)?, Some(search_val))
    } else {
        (stack, None)
    };
    let test_accuracy = evaluate(&ws, &stack, &agents, &masks.test, cfg)?;
    let val_accuracy = if masks.val.is_empty() {
        0.0
    } else {
        evaluate(&ws, &stack, &agents, &masks.val, cfg)?
    };
    let mut width_counts = vec![0; ws.max_width()];
    let mut depth_counts = vec![0; stack.max_layers()];
    for &t in ws.graph().targets() {
        let (k, l) = agents.greedy(ws.state(t)?)?;
        width_counts[k - 1] += 1;
        depth_counts[l - 1] += 1;
    }
    let summary = Summary {
        variant: cfg.variant,
        seed: cfg.seed,
        test_accuracy,
        val_accuracy,
        search_val_accuracy: search_val,
        n_train: masks.train.len(),
        n_val: masks.val.len(),
        n_test: masks.test.len(),
        width_counts,
        depth_counts,
    };
    Ok(RunResult {
        workspace: ws,
        stack,
        agents,
        log,
        summary,
    })
}
