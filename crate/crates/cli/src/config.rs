use std::path::{Path, PathBuf};

use rosgas_core::synthgen::SynthConfig;
use rosgas_core::trainer::{TrainConfig, Variant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Input and output locations. Every file a command writes lands in
/// `out_dir`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Graph JSONL read by `train`, `ablate`, `probe`, and `export-emb`.
    pub graph_in: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Directory holding `gnn.ckpt` and agent checkpoints for `export-emb`;
    /// defaults to `out_dir`.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            graph_in: None,
            out_dir: PathBuf::from("out"),
            checkpoint_dir: None,
        }
    }
}

/// How labeled targets are split into train, validation, and test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub folds: usize,
    /// Fold used by single-split commands.
    pub fold: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { folds: 10, fold: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    /// Score each (variant, seed) by the mean over every fold instead of
    /// the single configured fold.
    pub cross_validate: bool,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            seeds: (0..5).collect(),
            cross_validate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub targets: usize,
    pub runs: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { targets: 20, runs: 100 }
    }
}

/// Everything a command needs, read from one JSON file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub ablate: AblateConfig,
    pub probe: ProbeConfig,
    pub paths: Paths,
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `key=value`
    /// overrides on dotted paths, then `seed` on both seed fields.
    pub fn load(path: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for s in sets {
            apply_set(&mut value, s)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(seed) = seed {
            cfg.synth.seed = seed;
            cfg.train.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.synth
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.train.validate()?;
        if self.split.folds < 2 || self.split.fold >= self.split.folds {
            return Err(CliError::Config(format!(
                "split needs folds >= 2 and fold < folds, got fold {} of {}",
                self.split.fold, self.split.folds
            )));
        }
        if self.probe.targets == 0 || self.probe.runs == 0 {
            return Err(CliError::Config("probe targets and runs must be positive".into()));
        }
        Ok(())
    }

    pub fn graph_path(&self) -> Result<&Path, CliError> {
        self.paths
            .graph_in
            .as_deref()
            .ok_or_else(|| CliError::Config("paths.graph_in is not set".into()))
    }

    pub fn checkpoint_dir(&self) -> &Path {
        self.paths
            .checkpoint_dir
            .as_deref()
            .unwrap_or(&self.paths.out_dir)
    }
}

/// Sets `a.b.c=value`. The value is parsed as JSON when possible and kept
/// as a string otherwise; intermediate objects are created as needed so
/// unknown keys surface when the result is deserialized.
fn apply_set(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {assignment:?}")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("malformed key {key:?}")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    for part in key.split('.') {
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        cur = cur
            .as_object_mut()
            .expect("just made an object")
            .entry(part)
            .or_insert(Value::Null);
    }
    *cur = parsed;
    Ok(())
}

/// Pretty JSON of the default configuration, shown in `--help`.
pub fn defaults_json() -> String {
    serde_json::to_string_pretty(&RunConfig::default()).expect("config serializes")
}
