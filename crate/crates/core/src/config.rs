//! Experiment configuration (TOML) and load-time validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocator::DEFAULT_EPSILON;
use crate::error::{Error, Result};
use crate::partition::{PartitionKind, PartitionSpec, SyntheticSpec};
use crate::slimnet::{ModelSpec, WidthGrid};
use crate::train::{LrSchedule, TrainParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Federated training, standalone accuracies, then allocation.
    PostTraining,
    /// Federated training with per-round contribution-based widths.
    TrainingTime,
    /// Allocation only, from inline contributions and menu.
    AllocateOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        samples: usize,
        dim: usize,
        classes: usize,
        spread: f64,
        #[serde(default = "one")]
        modes: usize,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub norm: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: vec![32, 32], norm: true }
    }
}

/// How client contributions are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContributionConfig {
    /// Standalone accuracy on the test split (post-training mode).
    Standalone,
    /// `r_i = 0.5 (1 + i/N)`, also used to gate participation (post-training mode).
    Participation,
    /// Cosine of the update with the aggregate update direction (training-time mode).
    Cgsv,
    /// CGSV on the last `m` layers (training-time mode).
    ShapfedLite { m: usize },
}

/// Inline inputs for allocate-only runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocateInput {
    pub contributions: Vec<f64>,
    /// Achievable accuracies, one per width.
    pub menu: Vec<f64>,
    /// Widths of the menu entries; evenly spaced in `[p_min, 1]` when omitted.
    #[serde(default)]
    pub widths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub clients: usize,
    pub rounds: usize,
    pub local_iterations: usize,
    pub lr: f64,
    /// Fractions of `rounds` at which the learning rate decays.
    pub lr_milestones: Vec<f64>,
    pub lr_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub p_min: f64,
    pub bucket_step: f64,
    pub test_fraction: f64,
    pub standalone_epochs: usize,
    /// Clients whose training labels are replaced with uniform noise.
    pub noisy_clients: Vec<usize>,
    pub data: DataSource,
    pub model: ModelConfig,
    pub partition: PartitionKind,
    pub contribution: Option<ContributionConfig>,
    pub allocate: Option<AllocateInput>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::PostTraining,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            clients: 5,
            rounds: 100,
            local_iterations: 10,
            lr: 0.2,
            lr_milestones: vec![0.5, 0.75],
            lr_decay: 0.1,
            momentum: 0.9,
            batch_size: 128,
            gamma: 0.5,
            epsilon: DEFAULT_EPSILON,
            p_min: 0.25,
            bucket_step: 0.05,
            test_fraction: 0.2,
            standalone_epochs: 30,
            noisy_clients: Vec::new(),
            data: DataSource::Synthetic { samples: 2000, dim: 8, classes: 4, spread: 0.2, modes: 16 },
            model: ModelConfig::default(),
            partition: PartitionKind::Dirichlet { alpha: 0.5 },
            contribution: None,
            allocate: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The contribution measure, defaulting per mode.
    pub fn contribution_method(&self) -> ContributionConfig {
        self.contribution.unwrap_or(match self.mode {
            RunMode::TrainingTime => ContributionConfig::Cgsv,
            _ => ContributionConfig::Standalone,
        })
    }

    pub fn grid(&self) -> Result<WidthGrid> {
        WidthGrid::with_step(self.p_min, self.bucket_step)
    }

    pub fn partition_spec(&self) -> PartitionSpec {
        PartitionSpec { kind: self.partition.clone(), clients: self.clients }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams { lr: self.lr, momentum: self.momentum, batch_size: self.batch_size }
    }

    pub fn lr_schedule(&self) -> Result<LrSchedule> {
        LrSchedule::from_fractions(self.lr, &self.lr_milestones, self.lr_decay, self.rounds)
    }

    pub fn model_spec(&self, input: usize, classes: usize) -> ModelSpec {
        ModelSpec { input, hidden: self.model.hidden.clone(), classes, norm: self.model.norm }
    }

    /// Every violated precondition; empty when the config can run.
    pub fn validate(&self) -> Vec<String> {
        let mut d = Vec::new();
        if !(self.p_min > 0.0 && self.p_min <= 1.0) {
            d.push(format!("p_min must lie in (0, 1], got {}", self.p_min));
        }
        if !(self.bucket_step > 0.0 && self.bucket_step <= 1.0) {
            d.push(format!("bucket_step must lie in (0, 1], got {}", self.bucket_step));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            d.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.mode == RunMode::AllocateOnly {
            self.validate_allocate(&mut d);
            return d;
        }
        if self.clients == 0 {
            d.push("clients must be at least 1".into());
        }
        if self.rounds == 0 {
            d.push("rounds must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            d.push(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            d.push(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            d.push(format!("lr_decay must be positive, got {}", self.lr_decay));
        }
        if self.lr_milestones.iter().any(|f| !(0.0..=1.0).contains(f)) {
            d.push("lr_milestones must be fractions in [0, 1]".into());
        }
        if self.batch_size == 0 {
            d.push("batch_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            d.push(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            d.push(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.model.hidden.contains(&0) {
            d.push("hidden layer sizes must be positive".into());
        }
        if let Some(&bad) = self.noisy_clients.iter().find(|&&i| i >= self.clients) {
            d.push(format!("noisy client {bad} does not exist"));
        }
        let classes = match &self.data {
            DataSource::Synthetic { samples, dim, classes, spread, modes } => {
                if *dim == 0 || *classes == 0 || *modes == 0 {
                    d.push("synthetic data needs positive dim, classes and modes".into());
                }
                if samples < classes {
                    d.push(format!("{samples} samples cannot cover {classes} classes"));
                }
                if !(*spread >= 0.0 && spread.is_finite()) {
                    d.push(format!("spread must be non-negative, got {spread}"));
                }
                Some(*classes)
            }
            DataSource::Idx { images, labels, .. } => {
                for p in [images, labels] {
                    if !p.exists() {
                        d.push(format!("data file {} not found", p.display()));
                    }
                }
                None
            }
        };
        d.extend(self.partition_spec().diagnostics(classes));
        let method = self.contribution_method();
        match (self.mode, method) {
            (RunMode::PostTraining, ContributionConfig::Cgsv | ContributionConfig::ShapfedLite { .. }) => {
                d.push("post_training mode takes standalone or participation contributions".into())
            }
            (RunMode::TrainingTime, ContributionConfig::Standalone | ContributionConfig::Participation) => {
                d.push("training_time mode takes cgsv or shapfed_lite contributions".into())
            }
            _ => {}
        }
        if let ContributionConfig::ShapfedLite { m } = method {
            let layers = self.model.hidden.len() + 1;
            if m == 0 || m > layers {
                d.push(format!("shapfed_lite m = {m} outside [1, {layers}]"));
            }
        }
        d
    }

    fn validate_allocate(&self, d: &mut Vec<String>) {
        let Some(a) = &self.allocate else {
            d.push("allocate_only mode needs an [allocate] table".into());
            return;
        };
        if a.contributions.is_empty() {
            d.push("allocate.contributions is empty".into());
        }
        if a.menu.is_empty() {
            d.push("allocate.menu is empty".into());
        }
        if a.contributions.iter().chain(&a.menu).any(|v| !v.is_finite()) {
            d.push("allocate values must be finite".into());
        }
        if let Some(w) = &a.widths {
            if w.len() != a.menu.len() {
                d.push(format!("{} widths for {} menu entries", w.len(), a.menu.len()));
            }
            if w.windows(2).any(|p| p[0] >= p[1]) {
                d.push("allocate.widths must be strictly ascending".into());
            }
        }
    }

    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        match self.data {
            DataSource::Synthetic { samples, dim, classes, spread, modes } => {
                Some(SyntheticSpec { samples, dim, classes, spread, modes })
            }
            DataSource::Idx { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(ExperimentConfig::default().validate().is_empty());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "mode = \"training_time\"\nseed = 3\n[partition]\nkind = \"homogeneous\"\n[contribution]\nmethod = \"shapfed_lite\"\nm = 1\n",
        )
        .unwrap();
        assert_eq!(cfg.mode, RunMode::TrainingTime);
        assert_eq!(cfg.rounds, 100);
        assert_eq!(cfg.contribution_method(), ContributionConfig::ShapfedLite { m: 1 });
        assert!(cfg.validate().is_empty());
    }

    #[test]
    fn diagnostics_for_bad_values() {
        let cfg = ExperimentConfig { p_min: 0.0, ..Default::default() };
        assert!(cfg.validate().iter().any(|m| m.contains("p_min")));
        let cfg = ExperimentConfig { partition: PartitionKind::Dirichlet { alpha: -1.0 }, ..Default::default() };
        assert!(cfg.validate().iter().any(|m| m.contains("alpha")));
        let cfg = ExperimentConfig { rounds: 0, gamma: 2.0, ..Default::default() };
        assert_eq!(cfg.validate().len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("rouds = 3\n").is_err());
    }

    #[test]
    fn allocate_only_needs_inputs() {
        let cfg = ExperimentConfig { mode: RunMode::AllocateOnly, ..Default::default() };
        assert_eq!(cfg.validate().len(), 1);
        let cfg = ExperimentConfig {
            mode: RunMode::AllocateOnly,
            allocate: Some(AllocateInput { contributions: vec![0.3], menu: vec![0.5, 0.6], widths: Some(vec![1.0]) }),
            ..Default::default()
        };
        assert_eq!(cfg.validate().len(), 1);
    }

    #[test]
    fn mode_method_mismatch() {
        let cfg = ExperimentConfig { contribution: Some(ContributionConfig::Cgsv), ..Default::default() };
        assert_eq!(cfg.validate().len(), 1);
    }
}
