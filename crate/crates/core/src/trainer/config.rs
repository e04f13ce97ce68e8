use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::gnn::{GnnConfig, SslLossForm};
use crate::hetgraph::MetaPath;
use crate::rl::AgentConfig;

/// Which components a run enables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Search the width only; depth fixed at 3.
    #[serde(rename = "K")]
    K,
    /// Search the depth only; width fixed at 2.
    #[serde(rename = "L")]
    L,
    /// Search both.
    #[serde(rename = "KL")]
    Kl,
    /// Both, with nearest-neighbor value estimates.
    #[serde(rename = "KL-NN")]
    KlNn,
    /// Both, nearest-neighbor estimates, and the pretext loss.
    #[default]
    #[serde(rename = "FULL")]
    Full,
    /// Fixed width 2 and depth 3, no agents, no pretext loss.
    #[serde(rename = "BASELINE")]
    Baseline,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::K,
        Variant::L,
        Variant::Kl,
        Variant::KlNn,
        Variant::Full,
        Variant::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::K => "K",
            Variant::L => "L",
            Variant::Kl => "KL",
            Variant::KlNn => "KL-NN",
            Variant::Full => "FULL",
            Variant::Baseline => "BASELINE",
        }
    }

    pub fn searches_width(self) -> bool {
        matches!(self, Variant::K | Variant::Kl | Variant::KlNn | Variant::Full)
    }

    pub fn searches_depth(self) -> bool {
        matches!(self, Variant::L | Variant::Kl | Variant::KlNn | Variant::Full)
    }

    pub fn uses_rl(self) -> bool {
        self.searches_width() || self.searches_depth()
    }

    pub fn uses_nn(self) -> bool {
        matches!(self, Variant::KlNn | Variant::Full)
    }

    pub fn uses_ssl(self) -> bool {
        matches!(self, Variant::Full)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| TrainError::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub seed: u64,
    /// Width of the subgraph that defines the agent state.
    pub k_init: usize,
    /// Width used when the width is not searched.
    pub fixed_k: usize,
    /// Depth used when the depth is not searched.
    pub fixed_l: usize,
    /// Embedding size of every GCN layer.
    pub hidden: usize,
    pub heads: usize,
    pub classifier_hidden: usize,
    pub attention_slope: f64,
    /// GNN batch size; also the per-depth buffer flush threshold.
    pub batch_size: usize,
    pub episodes: usize,
    /// Env steps per episode; `None` means a quarter of the training targets.
    pub steps_per_episode: Option<usize>,
    /// Adam updates applied per buffer flush.
    pub flush_steps: usize,
    pub gnn_lr: f64,
    /// Weight of the parameter-norm penalty.
    pub lambda: f64,
    /// Epochs of the final retraining.
    pub epochs: usize,
    /// Margin of the pretext loss.
    pub margin: f64,
    pub ssl_loss_form: SslLossForm,
    /// Upper bound on the validation probe size.
    pub val_probe: usize,
    /// Meta-paths that filter the graph; `None` means the built-in set and
    /// an empty list disables filtering.
    pub metapaths: Option<Vec<MetaPath>>,
    pub agent: AgentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            seed: 0,
            k_init: 1,
            fixed_k: 2,
            fixed_l: 3,
            hidden: 64,
            heads: 2,
            classifier_hidden: 32,
            attention_slope: 0.2,
            batch_size: 64,
            episodes: 20,
            steps_per_episode: None,
            flush_steps: 4,
            gnn_lr: 0.05,
            lambda: 0.01,
            epochs: 30,
            margin: 0.1,
            ssl_loss_form: SslLossForm::AsPrinted,
            val_probe: 64,
            metapaths: None,
            agent: AgentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        self.agent.validate()?;
        if self.k_init == 0 {
            return bad("k_init must be at least 1".into());
        }
        if self.fixed_k == 0 || self.fixed_l == 0 || self.fixed_l > self.agent.l_max {
            return bad(format!(
                "fixed width and depth must be positive and depth at most l_max = {}",
                self.agent.l_max
            ));
        }
        if self.hidden == 0 || self.heads == 0 || self.classifier_hidden == 0 {
            return bad("hidden, heads, and classifier_hidden must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.gnn_lr > 0.0 && self.gnn_lr.is_finite()) {
            return bad("gnn_lr must be positive".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || !self.margin.is_finite() {
            return bad("lambda must be non-negative and margin finite".into());
        }
        if self.val_probe == 0 {
            return bad("val_probe must be positive".into());
        }
        if self.steps_per_episode == Some(0) {
            return bad("steps_per_episode must be positive".into());
        }
        if self.variant.uses_ssl() && self.agent.k_max < 2 {
            return Err(TrainError::Infeasible(
                "the pretext loss needs k_max of at least 2".into(),
            ));
        }
        Ok(())
    }

    /// GCN configuration for a graph with `in_dim` input features.
    pub fn gnn_config(&self, in_dim: usize) -> GnnConfig {
        GnnConfig {
            in_dim,
            hidden: self.hidden,
            max_layers: self.agent.l_max.max(self.fixed_l),
            heads: self.heads,
            classifier_hidden: self.classifier_hidden,
            attention_slope: self.attention_slope,
        }
    }

    /// Largest width any component may request.
    pub fn max_width(&self) -> usize {
        let searched = if self.variant.searches_width() {
            self.agent.k_max
        } else {
            0
        };
        searched.max(self.fixed_k).max(self.k_init)
    }

    pub fn metapath_list(&self) -> Vec<MetaPath> {
        self.metapaths.clone().unwrap_or_else(MetaPath::defaults)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_gates() {
        assert!(!Variant::Baseline.uses_rl());
        assert!(Variant::K.searches_width() && !Variant::K.searches_depth());
        assert!(Variant::L.searches_depth() && !Variant::L.searches_width());
        assert!(Variant::KlNn.uses_nn() && !Variant::KlNn.uses_ssl());
        assert!(Variant::Full.uses_ssl());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn full_needs_two_widths() {
        let mut c = TrainConfig::default();
        c.agent.k_max = 1;
        assert!(matches!(c.validate(), Err(TrainError::Infeasible(_))));
        c.variant = Variant::Kl;
        c.validate().unwrap();
    }
}
