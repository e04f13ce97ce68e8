use serde::{Deserialize, Serialize};

/// One environment step of the search loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    /// External id of the step's target user.
    pub target: u64,
    /// Chosen width, 1-based.
    pub k: usize,
    /// Chosen depth, 1-based.
    pub l: usize,
    pub val_accuracy: f64,
    /// Windowed accuracy measure.
    pub measure: f64,
    /// Binary reward, `−1` or `+1`.
    pub reward: f64,
    pub width_loss: Option<f64>,
    pub depth_loss: Option<f64>,
    /// Mean GNN loss of a flush triggered at this step.
    pub gnn_loss: Option<f64>,
}

/// One epoch of full-pass GNN training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub gnn_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricRecord {
    Step(StepRecord),
    Epoch(EpochRecord),
}

/// Append-only run log.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    records: Vec<MetricRecord>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: MetricRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            MetricRecord::Step(s) => Some(s),
            MetricRecord::Epoch(_) => None,
        })
    }

    pub fn epochs(&self) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter_map(|r| match r {
            MetricRecord::Epoch(e) => Some(e),
            MetricRecord::Step(_) => None,
        })
    }

    /// Mean validation accuracy per episode, in episode order.
    pub fn episode_val_means(&self) -> Vec<f64> {
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for s in self.steps() {
            if sums.len() <= s.episode {
                sums.resize(s.episode + 1, (0.0, 0));
            }
            sums[s.episode].0 += s.val_accuracy;
            sums[s.episode].1 += 1;
        }
        sums.into_iter()
            .filter(|&(_, n)| n > 0)
            .map(|(s, n)| s / n as f64)
            .collect()
    }
}
