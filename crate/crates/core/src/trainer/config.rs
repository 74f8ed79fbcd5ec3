use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::model::ModelConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

/// Training settings. Every field may be omitted from the JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub batch_size: usize,
    pub iterations: u64,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub decay_interval: u64,
    pub optimizer: Optimizer,
    /// Input points per training patch; larger patches are rejected.
    pub patch_size: usize,
    /// Output points per item during training; all ground-truth points
    /// when absent.
    pub train_points: Option<usize>,
    pub checkpoint_every: u64,
    pub model: ModelConfig,
    pub loss: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            output_dir: PathBuf::from("run"),
            seed: 0,
            batch_size: 4,
            iterations: 2000,
            learning_rate: 0.01,
            lr_decay: 0.5,
            decay_interval: 250,
            optimizer: Optimizer::Sgd,
            patch_size: 256,
            train_points: None,
            checkpoint_every: 250,
            model: ModelConfig::default(),
            loss: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 || self.patch_size == 0 || self.decay_interval == 0 {
            return bad("batch_size, patch_size and decay_interval must be positive");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be positive");
        }
        if self.train_points == Some(0) {
            return bad("train_points must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("learning_rate must be positive and lr_decay in (0, 1]");
        }
        if !(self.loss.normal >= 0.0 && self.loss.integration >= 0.0) {
            return bad("loss weights must be nonnegative");
        }
        Ok(())
    }

    /// Reads a JSON config; relative paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Synthetic dataset settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Surface specs such as `sphere` or `torus:major=0.7,minor=0.3`.
    pub surfaces: Vec<String>,
    /// Points in each whole input cloud.
    pub input_points: usize,
    /// Ground-truth density relative to the input.
    pub factor: f64,
    pub patch_size: usize,
    pub anchors: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            surfaces: vec!["sphere".into()],
            input_points: 256,
            factor: 4.0,
            patch_size: 256,
            anchors: 1,
            seed: 0,
            output_dir: PathBuf::from("data"),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.surfaces.is_empty() {
            return bad("at least one surface is required");
        }
        if !(self.factor >= 1.0 && self.factor.is_finite()) {
            return bad("factor must be at least 1");
        }
        if self.input_points == 0 || self.patch_size == 0 || self.anchors == 0 {
            return bad("input_points, patch_size and anchors must be positive");
        }
        if self.anchors > self.input_points {
            return bad("more anchors than input points");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.output_dir = path.parent().unwrap_or(Path::new("")).join(&cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }
}
