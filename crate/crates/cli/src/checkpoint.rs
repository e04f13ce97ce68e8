//! Checkpoint files: a `meta` block plus a flat map of named arrays, each
//! stored with its shape. Loading rejects missing, extra, or reshaped
//! parameters.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rosgas_core::gnn::{GnnConfig, GnnStack};
use rosgas_core::numcore::{Param, Tensor};
use rosgas_core::rl::{Agent, AgentConfig, NnMemory};
use rosgas_core::trainer::Variant;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayRecord {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl ArrayRecord {
    fn of(p: &Param) -> Self {
        let (r, c) = p.shape();
        Self {
            shape: [r, c],
            data: p.value.data().to_vec(),
        }
    }

    fn tensor(&self, name: &str) -> Result<Tensor, CliError> {
        Tensor::from_vec(self.shape[0], self.shape[1], self.data.clone()).map_err(|_| {
            CliError::Checkpoint(format!(
                "{name}: {} values do not fill shape {:?}",
                self.data.len(),
                self.shape
            ))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnnMeta {
    pub config: GnnConfig,
    pub variant: Variant,
    pub fixed_k: usize,
    pub fixed_l: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnnCheckpoint {
    pub meta: GnnMeta,
    pub params: BTreeMap<String, ArrayRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Width,
    Depth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentMeta {
    pub role: AgentRole,
    pub state_dim: usize,
    pub n_actions: usize,
    pub use_nn: bool,
    pub updates: u64,
    pub config: AgentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentCheckpoint {
    pub meta: AgentMeta,
    /// Prediction network under `pred.`, target network under `target.`.
    pub params: BTreeMap<String, ArrayRecord>,
    pub nn_memory: NnMemory,
}

impl GnnCheckpoint {
    pub fn from_stack(stack: &GnnStack, variant: Variant, fixed_k: usize, fixed_l: usize) -> Self {
        Self {
            meta: GnnMeta {
                config: stack.config().clone(),
                variant,
                fixed_k,
                fixed_l,
            },
            params: stack
                .named_params()
                .into_iter()
                .map(|(n, p)| (n, ArrayRecord::of(p)))
                .collect(),
        }
    }

    pub fn to_stack(&self) -> Result<GnnStack, CliError> {
        let mut stack = GnnStack::new(self.meta.config.clone(), &mut ChaCha8Rng::seed_from_u64(0))
            .map_err(|e| CliError::Checkpoint(e.to_string()))?;
        let expected: Vec<String> = stack.named_params().into_iter().map(|(n, _)| n).collect();
        check_names(&expected, &self.params)?;
        for name in &expected {
            let t = self.params[name].tensor(name)?;
            stack
                .load_param(name, t)
                .map_err(|e| CliError::Checkpoint(e.to_string()))?;
        }
        Ok(stack)
    }
}

impl AgentCheckpoint {
    pub fn from_agent(agent: &Agent, role: AgentRole) -> Self {
        let mut params = BTreeMap::new();
        for (prefix, net) in [("pred", &agent.pred), ("target", &agent.target)] {
            for (n, p) in net.named_params() {
                params.insert(format!("{prefix}.{n}"), ArrayRecord::of(p));
            }
        }
        Self {
            meta: AgentMeta {
                role,
                state_dim: agent.pred.state_dim(),
                n_actions: agent.n_actions(),
                use_nn: agent.use_nn,
                updates: agent.updates(),
                config: agent.config().clone(),
            },
            params,
            nn_memory: agent.memory.clone(),
        }
    }

    pub fn to_agent(&self) -> Result<Agent, CliError> {
        let m = &self.meta;
        let mut agent = Agent::new(
            m.state_dim,
            m.n_actions,
            &m.config,
            m.use_nn,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .map_err(|e| CliError::Checkpoint(e.to_string()))?;
        let mut expected = Vec::new();
        for prefix in ["pred", "target"] {
            for (n, _) in agent.pred.named_params() {
                expected.push(format!("{prefix}.{n}"));
            }
        }
        check_names(&expected, &self.params)?;
        for name in &expected {
            let t = self.params[name].tensor(name)?;
            let (prefix, local) = name.split_once('.').expect("names carry a prefix");
            let net = if prefix == "pred" {
                &mut agent.pred
            } else {
                &mut agent.target
            };
            net.load_param(local, t)
                .map_err(|e| CliError::Checkpoint(e.to_string()))?;
        }
        agent.memory = self.nn_memory.clone();
        agent.set_updates(m.updates);
        Ok(agent)
    }
}

fn check_names(expected: &[String], found: &BTreeMap<String, ArrayRecord>) -> Result<(), CliError> {
    for name in expected {
        if !found.contains_key(name) {
            return Err(CliError::Checkpoint(format!("missing parameter {name}")));
        }
    }
    if let Some(extra) = found.keys().find(|k| !expected.contains(k)) {
        return Err(CliError::Checkpoint(format!("unexpected parameter {extra}")));
    }
    Ok(())
}

pub fn save<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    crate::io::write_json(value, path)
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack() -> GnnStack {
        let cfg = GnnConfig {
            in_dim: 4,
            hidden: 3,
            ..GnnConfig::default()
        };
        GnnStack::new(cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn gnn_round_trip() {
        let s = stack();
        let ck = GnnCheckpoint::from_stack(&s, Variant::Full, 2, 3);
        let text = serde_json::to_string(&ck).unwrap();
        let back: GnnCheckpoint = serde_json::from_str(&text).unwrap();
        let restored = back.to_stack().unwrap();
        for ((n1, p1), (n2, p2)) in s.named_params().into_iter().zip(restored.named_params()) {
            assert_eq!(n1, n2);
            assert_eq!(p1.value, p2.value);
        }
    }

    #[test]
    fn reshaped_parameter_rejected() {
        let mut ck = GnnCheckpoint::from_stack(&stack(), Variant::Full, 2, 3);
        let rec = ck.params.get_mut("residual.weight").unwrap();
        rec.shape = [rec.shape[1], rec.shape[0] + 1];
        assert!(matches!(ck.to_stack(), Err(CliError::Checkpoint(_))));
    }

    #[test]
    fn missing_and_extra_parameters_rejected() {
        let mut ck = GnnCheckpoint::from_stack(&stack(), Variant::Full, 2, 3);
        let rec = ck.params.remove("gcn.0.weight").unwrap();
        assert!(ck.to_stack().is_err());
        ck.params.insert("gcn.0.weight".into(), rec.clone());
        ck.params.insert("gcn.9.weight".into(), rec);
        assert!(ck.to_stack().is_err());
    }

    #[test]
    fn agent_round_trip_keeps_memory() {
        let cfg = AgentConfig::default();
        let mut agent = Agent::new(4, 2, &cfg, true, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        agent
            .observe(rosgas_core::rl::Transition {
                state: vec![1.0, 0.0, 0.0, 0.0],
                action: 1,
                next_state: vec![0.0; 4],
                reward: 1.0,
            })
            .unwrap();
        agent.set_updates(7);
        let ck = AgentCheckpoint::from_agent(&agent, AgentRole::Width);
        let text = serde_json::to_string(&ck).unwrap();
        let back: AgentCheckpoint = serde_json::from_str(&text).unwrap();
        let restored = back.to_agent().unwrap();
        assert_eq!(restored.pred, agent.pred);
        assert_eq!(restored.target.layers.len(), agent.target.layers.len());
        assert_eq!(restored.memory, agent.memory);
        assert_eq!(restored.updates(), 7);
    }
}
