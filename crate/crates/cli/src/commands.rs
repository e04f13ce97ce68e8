use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rosgas_core::hetgraph::{HetGraph, Masks};
use rosgas_core::rl::AgentPair;
use rosgas_core::synthgen::{generate, make_folds};
use rosgas_core::trainer::{
    embed_targets, embedding_quality, layer_probe, run_pipeline, RunResult, Summary, TrainConfig,
    Variant, Workspace,
};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, AgentCheckpoint, AgentRole, GnnCheckpoint};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io;

/// Wall-clock figures, kept apart from `summary.json` so that file is a
/// pure function of config and seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub runtime_seconds: f64,
}

/// Mean and population standard deviation of per-fold test accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: Variant,
    pub seed: u64,
    pub folds: usize,
    pub test_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.paths.out_dir)?;
    Ok(&cfg.paths.out_dir)
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<(), CliError> {
    let s = generate(&cfg.synth)?;
    let dir = out_dir(cfg)?;
    io::write_graph(&s.graph, &dir.join("graph.jsonl"))?;
    io::write_truth(&s.truth, &dir.join("truth.json"))?;
    let bots = s
        .graph
        .targets()
        .iter()
        .filter(|&&t| s.graph.label(t) == Some(1))
        .count();
    println!(
        "nodes {} edges {} labeled {} (bots {}, benign {})",
        s.graph.n_nodes(),
        s.graph.n_edges(),
        s.graph.targets().len(),
        bots,
        s.graph.targets().len() - bots
    );
    Ok(())
}

fn load_graph(cfg: &RunConfig) -> Result<HetGraph, CliError> {
    io::read_graph(cfg.graph_path()?)
}

fn folds(g: &HetGraph, cfg: &RunConfig, seed: u64) -> Result<Vec<Masks>, CliError> {
    Ok(make_folds(g, cfg.split.folds, seed)?)
}

fn with_masks(g: &HetGraph, masks: Masks) -> Result<HetGraph, CliError> {
    g.clone()
        .with_masks(masks)
        .map_err(|e| CliError::Input(e.to_string()))
}

/// Writes checkpoints, metrics, summary, and timing of one run into `dir`.
fn write_run(r: &RunResult, cfg: &TrainConfig, seconds: f64, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let gnn = GnnCheckpoint::from_stack(&r.stack, cfg.variant, r.agents.fixed_k, r.agents.fixed_l);
    checkpoint::save(&gnn, &dir.join("gnn.ckpt"))?;
    for (agent, role, file) in [
        (&r.agents.width, AgentRole::Width, "agent1.ckpt"),
        (&r.agents.depth, AgentRole::Depth, "agent2.ckpt"),
    ] {
        let path = dir.join(file);
        match agent {
            Some(a) => checkpoint::save(&AgentCheckpoint::from_agent(a, role), &path)?,
            None if path.exists() => fs::remove_file(&path)?,
            None => {}
        }
    }
    io::write_metrics(&r.log, &dir.join("metrics.jsonl"))?;
    io::write_json(&r.summary, &dir.join("summary.json"))?;
    io::write_json(&Timing { runtime_seconds: seconds }, &dir.join("timing.json"))?;
    Ok(())
}

fn run_fold(g: &HetGraph, masks: Masks, cfg: &TrainConfig) -> Result<(RunResult, f64), CliError> {
    let g = with_masks(g, masks)?;
    let start = Instant::now();
    let r = run_pipeline(&g, cfg)?;
    Ok((r, start.elapsed().as_secs_f64()))
}

fn print_summary(s: &Summary, label: &str) {
    println!(
        "{label}{} seed {}: test {:.4} val {:.4} widths {:?} depths {:?}",
        s.variant, s.seed, s.test_accuracy, s.val_accuracy, s.width_counts, s.depth_counts
    );
}

/// Trains on the configured fold, or on every fold when `cross_validate`
/// is set, writing each fold under `fold_NN/` plus `aggregate.json`.
pub fn cmd_train(cfg: &RunConfig, cross_validate: bool) -> Result<(), CliError> {
    let g = load_graph(cfg)?;
    let dir = out_dir(cfg)?;
    let all = folds(&g, cfg, cfg.train.seed)?;
    if !cross_validate {
        let (r, secs) = run_fold(&g, all[cfg.split.fold].clone(), &cfg.train)?;
        write_run(&r, &cfg.train, secs, dir)?;
        print_summary(&r.summary, "");
        return Ok(());
    }
    let mut accs = Vec::with_capacity(all.len());
    for (f, masks) in all.into_iter().enumerate() {
        let (r, secs) = run_fold(&g, masks, &cfg.train)?;
        write_run(&r, &cfg.train, secs, &dir.join(format!("fold_{f:02}")))?;
        print_summary(&r.summary, &format!("fold {f}: "));
        accs.push(r.summary.test_accuracy);
    }
    let (mean, std) = mean_std(&accs);
    let agg = Aggregate {
        variant: cfg.train.variant,
        seed: cfg.train.seed,
        folds: accs.len(),
        test_accuracy: accs,
        mean,
        std,
    };
    io::write_json(&agg, &dir.join("aggregate.json"))?;
    println!("{}-fold test accuracy {:.4} ± {:.4}", agg.folds, mean, std);
    Ok(())
}

/// One row of the ablation table. Aggregate rows carry `seed = "mean"` and
/// a standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub seed: String,
    pub test_accuracy: f64,
    pub std: Option<f64>,
}

/// Test accuracy of one (variant, seed) cell: the mean over every fold, or
/// the configured fold alone. Folds and training share the seed.
pub fn ablation_cell(g: &HetGraph, cfg: &RunConfig, variant: Variant, seed: u64) -> Result<f64, CliError> {
    let mut train = cfg.train.clone();
    train.variant = variant;
    train.seed = seed;
    let all = folds(g, cfg, seed)?;
    let chosen: Vec<Masks> = if cfg.ablate.cross_validate {
        all
    } else {
        vec![all[cfg.split.fold].clone()]
    };
    let mut accs = Vec::with_capacity(chosen.len());
    for masks in chosen {
        accs.push(run_fold(g, masks, &train)?.0.summary.test_accuracy);
    }
    Ok(mean_std(&accs).0)
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<AblationRow>, CliError> {
    let g = load_graph(cfg)?;
    let dir = out_dir(cfg)?;
    let jobs: Vec<(Variant, u64)> = cfg
        .ablate
        .variants
        .iter()
        .flat_map(|&v| cfg.ablate.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(v, s)| ablation_cell(&g, cfg, v, s))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<AblationRow> = jobs
        .iter()
        .zip(&scores)
        .map(|(&(v, s), &acc)| AblationRow {
            variant: v.to_string(),
            seed: s.to_string(),
            test_accuracy: acc,
            std: None,
        })
        .collect();
    for &v in &cfg.ablate.variants {
        let accs: Vec<f64> = jobs
            .iter()
            .zip(&scores)
            .filter(|((jv, _), _)| *jv == v)
            .map(|(_, &a)| a)
            .collect();
        let (mean, std) = mean_std(&accs);
        rows.push(AblationRow {
            variant: v.to_string(),
            seed: "mean".into(),
            test_accuracy: mean,
            std: Some(std),
        });
    }
    let mut w = csv::Writer::from_path(dir.join("ablation.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    for row in rows.iter().filter(|r| r.seed == "mean") {
        println!(
            "{:<8} {:.4} ± {:.4}",
            row.variant,
            row.test_accuracy,
            row.std.unwrap_or(0.0)
        );
    }
    Ok(rows)
}

/// Probe targets: a seeded draw from the validation and test targets.
fn probe_targets(g: &HetGraph, n: usize, seed: u64) -> Vec<usize> {
    let m = g.masks();
    let mut pool: Vec<usize> = m.val.iter().chain(&m.test).copied().collect();
    pool.sort_unstable();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pool.truncate(n);
    pool.sort_unstable();
    pool
}

pub fn cmd_probe(cfg: &RunConfig) -> Result<f64, CliError> {
    let g = load_graph(cfg)?;
    let dir = out_dir(cfg)?;
    let masks = folds(&g, cfg, cfg.train.seed)?.swap_remove(cfg.split.fold);
    let g = with_masks(&g, masks)?;
    let r = run_pipeline(&g, &cfg.train)?;
    let targets = probe_targets(r.workspace.graph(), cfg.probe.targets, cfg.train.seed);
    let rows = layer_probe(&r.workspace, &cfg.train, &r.agents, &targets, cfg.probe.runs)?;
    let depths = rows.first().map_or(0, |row| row.ratios.len());
    let mut w = csv::Writer::from_path(dir.join("probe.csv"))?;
    let mut header = vec!["target_id".to_string()];
    header.extend((1..=depths).map(|l| format!("ratio_l{l}")));
    header.extend(["agent_choice".to_string(), "match".to_string()]);
    w.write_record(&header)?;
    for row in &rows {
        let mut rec = vec![row.target_id.to_string()];
        rec.extend(row.ratios.iter().map(|r| r.to_string()));
        rec.push(row.agent_choice.to_string());
        rec.push(row.matched.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    let rate = rows.iter().filter(|r| r.matched).count() as f64 / rows.len() as f64;
    println!("agent depth in best set for {:.1}% of {} targets", 100.0 * rate, rows.len());
    Ok(rate)
}

/// Restores the stack and policy saved in `dir`.
pub fn load_model(dir: &Path) -> Result<(GnnCheckpoint, AgentPair), CliError> {
    let gnn: GnnCheckpoint = checkpoint::load(&dir.join("gnn.ckpt"))?;
    let mut policy = AgentPair::fixed(gnn.meta.fixed_k, gnn.meta.fixed_l);
    for (file, role) in [("agent1.ckpt", AgentRole::Width), ("agent2.ckpt", AgentRole::Depth)] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let ck: AgentCheckpoint = checkpoint::load(&path)?;
        if ck.meta.role != role {
            return Err(CliError::Checkpoint(format!("{file} holds a {:?} agent", ck.meta.role)));
        }
        let agent = ck.to_agent()?;
        match role {
            AgentRole::Width => policy.width = Some(agent),
            AgentRole::Depth => policy.depth = Some(agent),
        }
    }
    Ok((gnn, policy))
}

pub fn cmd_export_emb(cfg: &RunConfig) -> Result<f64, CliError> {
    let g = load_graph(cfg)?;
    let (gnn, policy) = load_model(cfg.checkpoint_dir())?;
    let stack = gnn.to_stack()?;
    let dim = g.feature_dim();
    if stack.config().in_dim != dim {
        return Err(CliError::Checkpoint(format!(
            "checkpoint expects {} input features, graph has {dim}",
            stack.config().in_dim
        )));
    }
    let mut train = cfg.train.clone();
    train.variant = gnn.meta.variant;
    train.fixed_k = gnn.meta.fixed_k;
    train.fixed_l = gnn.meta.fixed_l;
    if let Some(a) = &policy.width {
        train.agent.k_max = a.n_actions();
    }
    for a in policy.width.iter().chain(&policy.depth) {
        if a.pred.state_dim() != dim {
            return Err(CliError::Checkpoint(format!(
                "agent expects state dimension {}, graph has {dim}",
                a.pred.state_dim()
            )));
        }
    }
    if let Some(a) = &policy.depth {
        if a.n_actions() > stack.max_layers() {
            return Err(CliError::Checkpoint("depth agent exceeds the stack's layers".into()));
        }
    }
    let ws = Workspace::new(&g, &train)?;
    let targets = ws.graph().targets().to_vec();
    let emb = embed_targets(&ws, &stack, &policy, &targets, &train)?;
    let labels: Vec<u8> = targets
        .iter()
        .map(|&t| ws.graph().label(t).unwrap_or(0))
        .collect();

    let dir = out_dir(cfg)?;
    let mut w = csv::Writer::from_path(dir.join("embeddings.csv"))?;
    let width = emb.first().map_or(0, |e| e.z.len());
    let mut header = vec!["target_id".to_string(), "label".to_string()];
    header.extend((1..=width).map(|i| format!("z_{i}")));
    w.write_record(&header)?;
    for ((e, &t), &y) in emb.iter().zip(&targets).zip(&labels) {
        let mut rec = vec![ws.graph().external_id(t).to_string(), y.to_string()];
        rec.extend(e.z.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let points: Vec<Vec<f64>> = emb.into_iter().map(|e| e.z).collect();
    let score = embedding_quality(&points, &labels, train.seed)?;
    println!("homogeneity {score:.4} over {} targets", targets.len());
    Ok(score)
}
