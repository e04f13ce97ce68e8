use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::{predict, Item};
use super::{final_retrain, MetricsLog, TrainConfig, TrainError, Workspace};
use crate::rl::AgentPair;

/// Per-target outcome of the layer probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    /// External id of the target.
    pub target_id: u64,
    /// Fraction of runs classifying the target correctly, per depth.
    pub ratios: Vec<f64>,
    /// The agent's greedy depth, 1-based.
    pub agent_choice: usize,
    /// Whether the agent's depth attains the best ratio.
    pub matched: bool,
}

/// Retrains a fixed-depth model for every depth in each of `runs` seeded
/// runs, widths chosen greedily by `agents`, and tallies how often each
/// probe target is classified correctly. Runs execute in parallel on the
/// current rayon pool; results do not depend on the pool size.
pub fn layer_probe(
    ws: &Workspace,
    cfg: &TrainConfig,
    agents: &AgentPair,
    targets: &[usize],
    runs: usize,
) -> Result<Vec<ProbeRow>, TrainError> {
    if runs == 0 || targets.is_empty() {
        return Err(TrainError::InvalidConfig(
            "the probe needs at least one run and one target".into(),
        ));
    }
    let depths = cfg.agent.l_max.max(cfg.fixed_l);
    let widths: Vec<usize> = targets
        .iter()
        .map(|&t| Ok(agents.greedy(ws.state(t)?)?.0))
        .collect::<Result<_, TrainError>>()?;
    let labels: Vec<bool> = targets
        .iter()
        .map(|&t| Ok(ws.label(t)? > 0.5))
        .collect::<Result<_, TrainError>>()?;

    let jobs: Vec<(usize, usize)> = (0..runs)
        .flat_map(|r| (1..=depths).map(move |l| (r, l)))
        .collect();
    let outcomes: Vec<Vec<bool>> = jobs
        .par_iter()
        .map(|&(r, l)| {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = cfg.seed.wrapping_add(1 + r as u64);
            let mut policy = agents.clone();
            policy.depth = None;
            policy.fixed_l = l;
            let stack = final_retrain(ws, &run_cfg, &policy, &mut MetricsLog::new())?;
            let items: Vec<Item> = targets
                .iter()
                .zip(&widths)
                .map(|(&t, &k)| Item { target: t, k, l })
                .collect();
            let preds = predict(ws, &stack, &items, &run_cfg)?;
            Ok(preds
                .iter()
                .zip(&labels)
                .map(|((logit, _), &y)| (*logit > 0.0) == y)
                .collect())
        })
        .collect::<Result<_, TrainError>>()?;

    let mut rows = Vec::with_capacity(targets.len());
    for (i, &t) in targets.iter().enumerate() {
        let mut hits = vec![0usize; depths];
        for (&(_, l), correct) in jobs.iter().zip(&outcomes) {
            if correct[i] {
                hits[l - 1] += 1;
            }
        }
        let best = *hits.iter().max().expect("at least one depth");
        let choice = agents.greedy(ws.state(t)?)?.1;
        rows.push(ProbeRow {
            target_id: ws.graph().external_id(t),
            ratios: hits.iter().map(|&h| h as f64 / runs as f64).collect(),
            agent_choice: choice,
            matched: hits[choice - 1] == best,
        });
    }
    Ok(rows)
}
