use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{
    build_dataset, synth_generate, DatasetManifest, LabeledSample, SampleCache, SynthSpec, Task,
};
use crate::error::{config_err, Error, Result};
use crate::model::ModelConfig;
use crate::signal::preprocess;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "STILN_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    /// Clamped to the training-set size.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub task: Task,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            batch_size: 256,
            epochs: 20,
            seed: 0,
            task: Task::Arousal,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return config_err(format!(
                "learning rate must be finite and non-negative, got {}",
                self.lr
            ));
        }
        if self.batch_size < 2 {
            return config_err(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            ));
        }
        if self.epochs == 0 {
            return config_err("epochs must be positive");
        }
        self.model.validate()
    }
}

/// Where samples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// A sample cache written by `preprocess`.
    Cache(PathBuf),
    /// A trial directory written by `synth` (or converted recordings).
    Raw(PathBuf),
    /// Generate in memory.
    Synth(SynthSpec),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth(SynthSpec::default())
    }
}

/// A complete experiment: data, training settings and reporting options.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub train: TrainConfig,
    /// Subjects averaged in the top-k row; defaults to 10.
    pub top_k: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Applies `STILN_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.train.seed = v.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })?;
        }
        Ok(())
    }

    pub fn top_k(&self) -> usize {
        self.top_k.unwrap_or(10)
    }
}

/// Labeled samples for `task` from any source.
pub fn load_samples(source: &DataSource, task: Task) -> Result<Vec<LabeledSample>> {
    match source {
        DataSource::Cache(dir) => SampleCache::load(dir)?.samples(task),
        DataSource::Raw(dir) => {
            let (_, trials) = DatasetManifest::load(dir)?;
            preprocessed(&trials, task)
        }
        DataSource::Synth(spec) => preprocessed(&synth_generate(spec)?, task),
    }
}

fn preprocessed(trials: &[crate::signal::RawTrial], task: Task) -> Result<Vec<LabeledSample>> {
    let clean = trials.iter().map(preprocess).collect::<Result<Vec<_>>>()?;
    build_dataset(&clean, task)
}
