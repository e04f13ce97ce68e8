use serde::{Deserialize, Serialize};

use super::RlError;

/// How the reward window is averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMeanForm {
    /// Sum of the last `b` accuracies divided by `b − 1`.
    #[default]
    AsPrinted,
    /// Arithmetic mean of the last `b` accuracies.
    TrueMean,
}

/// Hyperparameters shared by both agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Width actions are `1..=k_max`.
    pub k_max: usize,
    /// Depth actions are `1..=l_max`.
    pub l_max: usize,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Env steps over which ε decays linearly; `None` means half of the run.
    pub eps_decay_steps: Option<usize>,
    pub lr: f64,
    pub replay_capacity: usize,
    pub replay_batch: usize,
    /// DQN updates per env step.
    pub train_steps: usize,
    /// DQN updates between target syncs.
    pub target_sync: usize,
    pub l_corr: f64,
    pub alpha0: f64,
    pub beta: f64,
    pub reward_window: usize,
    pub reward_mean_form: RewardMeanForm,
    pub nn_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            k_max: 2,
            l_max: 3,
            gamma: 0.95,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: None,
            lr: 1e-3,
            replay_capacity: 2048,
            replay_batch: 64,
            train_steps: 1,
            target_sync: 10,
            l_corr: 7.0,
            alpha0: 0.5,
            beta: 0.05,
            reward_window: 5,
            reward_mean_form: RewardMeanForm::AsPrinted,
            nn_capacity: 2048,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::InvalidConfig(m.to_string()));
        if self.k_max < 1 || self.l_max < 1 {
            return bad("k_max and l_max must be at least 1");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        for e in [self.eps_start, self.eps_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon bounds must lie in [0, 1]");
            }
        }
        if !(0.0..=1.0).contains(&self.alpha0) || !(0.0..1.0).contains(&self.beta) {
            return bad("alpha0 must lie in [0, 1] and beta in [0, 1)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !self.l_corr.is_finite() {
            return bad("lr must be positive and l_corr finite");
        }
        if self.replay_capacity == 0 || self.replay_batch == 0 || self.nn_capacity == 0 {
            return bad("replay and memory sizes must be positive");
        }
        if self.target_sync == 0 {
            return bad("target_sync must be positive");
        }
        if self.reward_window < 2 {
            return bad("reward_window must be at least 2");
        }
        Ok(())
    }

    /// ε after `step` env steps of a run lasting `total` steps.
    pub fn epsilon_at(&self, step: usize, total: usize) -> f64 {
        let horizon = self.eps_decay_steps.unwrap_or(total / 2).max(1);
        if step >= horizon {
            return self.eps_end;
        }
        let frac = step as f64 / horizon as f64;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        AgentConfig::default().validate().unwrap();
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let c = AgentConfig::default();
        assert_eq!(c.epsilon_at(0, 100), 1.0);
        assert!((c.epsilon_at(25, 100) - 0.525).abs() < 1e-12);
        assert_eq!(c.epsilon_at(50, 100), 0.05);
        assert_eq!(c.epsilon_at(99, 100), 0.05);
    }

    #[test]
    fn rejects_gamma_one() {
        let c = AgentConfig {
            gamma: 1.0,
            ..AgentConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
