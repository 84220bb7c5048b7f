//! Declarative experiment configuration.
//!
//! The config is TOML and round-trips through serialization unchanged.
//! Every hyperparameter has an explicit default, and the resolved config is
//! written next to each report so runs are self-documenting. The canonical
//! serialization feeds the config hash that stamps every report.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use evitrans_core::adam::AdamConfig;
use evitrans_core::layer::Activation;
use evitrans_core::train::{ScreeningConfig, TrainConfig};

use crate::dataio::catalog::EventType;
use crate::dataio::synth::SynthConfig;
use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: String,
    pub data: DataConfig,
    pub task: TaskConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub autoencoder: AutoencoderSection,
    #[serde(default)]
    pub transfer: TransferSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

/// Exactly one data source: pre-extracted files or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    Files { features: String, catalog: String },
    Synth { synth: SynthConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    /// One event type as ground truth, others as external evidence.
    Rotation {
        ground_truth: EventType,
        evidence: Vec<EventType>,
        #[serde(default = "default_nonsevere_samples")]
        nonsevere_samples: usize,
    },
    /// All severe types combined into one class, with the ground-truth
    /// labels themselves fed back as the (single) evidence source.
    GroundTruthAsEvidence,
}

fn default_nonsevere_samples() -> usize {
    500
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    None,
    Oversample,
    Undersample,
    Combine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub strategy: SamplingStrategy,
    pub smote_k: usize,
    pub enn_k: usize,
    pub target_ratio: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            strategy: SamplingStrategy::None,
            smote_k: 5,
            enn_k: 3,
            target_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Sigmoid,
    Linear,
    Relu,
}

impl From<OutputActivation> for Activation {
    fn from(a: OutputActivation) -> Self {
        match a {
            OutputActivation::Sigmoid => Activation::Sigmoid,
            OutputActivation::Linear => Activation::Linear,
            OutputActivation::Relu => Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderSection {
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub corruption: f64,
    pub output_activation: OutputActivation,
    pub epochs: usize,
    pub learning_rate: f64,
    /// 0 trains full-batch.
    pub batch_size: usize,
}

impl Default for AutoencoderSection {
    fn default() -> Self {
        Self {
            hidden: vec![512, 256],
            latent: 10,
            corruption: 0.2,
            output_activation: OutputActivation::Sigmoid,
            epochs: 300,
            learning_rate: 1e-3,
            batch_size: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Keep applying input corruption during the transfer step.
    pub corrupt: bool,
    pub screening: bool,
    pub screening_epochs: usize,
    pub screening_threshold: f64,
    pub screening_hidden: usize,
    pub screening_learning_rate: f64,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            epochs: 300,
            learning_rate: 1e-3,
            corrupt: true,
            screening: true,
            screening_epochs: 50,
            screening_threshold: 0.9,
            screening_hidden: 8,
            screening_learning_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Kmeans,
    Agglo,
    Ocsvm,
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Kmeans => "kmeans",
            DetectorKind::Agglo => "agglo",
            DetectorKind::Ocsvm => "ocsvm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageKind {
    Ward,
    Complete,
    Average,
    Single,
}

impl From<LinkageKind> for evitrans_core::detect::Linkage {
    fn from(l: LinkageKind) -> Self {
        use evitrans_core::detect::Linkage;
        match l {
            LinkageKind::Ward => Linkage::Ward,
            LinkageKind::Complete => Linkage::Complete,
            LinkageKind::Average => Linkage::Average,
            LinkageKind::Single => Linkage::Single,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub kind: DetectorKind,
    pub kmeans_n_init: usize,
    pub linkage: LinkageKind,
    pub nu: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            kind: DetectorKind::Kmeans,
            kmeans_n_init: 10,
            linkage: LinkageKind::Ward,
            nu: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationMode {
    /// Score every sample (train equals evaluation set).
    Full,
    /// Transfer trains on a seeded train split; metrics use the held-out rows.
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub mode: EvaluationMode,
    pub test_fraction: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            mode: EvaluationMode::Full,
            test_fraction: 0.25,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, truncated to 16 hex chars.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn validate(&self) -> Result<()> {
        if let TaskConfig::Rotation {
            ground_truth,
            evidence,
            ..
        } = &self.task
        {
            if evidence.is_empty() {
                return Err(AppError::Config(
                    "rotation task needs at least one evidence type".into(),
                ));
            }
            if evidence.contains(ground_truth) {
                return Err(AppError::Config(format!(
                    "ground truth type {ground_truth} cannot also serve as evidence"
                )));
            }
        }
        if let DataConfig::Synth { synth } = &self.data {
            synth.validate()?;
        }
        if self.autoencoder.latent == 0 {
            return Err(AppError::Config("latent width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.autoencoder.corruption) {
            return Err(AppError::Config(format!(
                "corruption rate must lie in [0, 1), got {}",
                self.autoencoder.corruption
            )));
        }
        if self.transfer.lambda < 0.0 {
            return Err(AppError::Config("lambda must be non-negative".into()));
        }
        if !(self.detector.nu > 0.0 && self.detector.nu <= 1.0) {
            return Err(AppError::Config(format!(
                "nu must lie in (0, 1], got {}",
                self.detector.nu
            )));
        }
        if self.evaluation.mode == EvaluationMode::Split
            && !(0.0 < self.evaluation.test_fraction && self.evaluation.test_fraction < 1.0)
        {
            return Err(AppError::Config(format!(
                "test fraction must lie in (0, 1), got {}",
                self.evaluation.test_fraction
            )));
        }
        if !(self.autoencoder.learning_rate > 0.0) || !(self.transfer.learning_rate > 0.0) {
            return Err(AppError::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    /// Training settings for the initialization step.
    pub fn init_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.autoencoder.epochs,
            batch_size: self.autoencoder.batch_size,
            optimizer: AdamConfig::with_learning_rate(self.autoencoder.learning_rate),
            corrupt: true,
            seed,
            ..TrainConfig::new(self.autoencoder.epochs, seed)
        }
    }

    /// Training settings for the transfer step.
    pub fn transfer_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.transfer.epochs,
            batch_size: self.autoencoder.batch_size,
            optimizer: AdamConfig::with_learning_rate(self.transfer.learning_rate),
            corrupt: self.transfer.corrupt,
            seed,
            ..TrainConfig::new(self.transfer.epochs, seed)
        }
    }

    pub fn screening_config(&self, seed: u64) -> ScreeningConfig {
        ScreeningConfig {
            budget_epochs: self.transfer.screening_epochs,
            threshold: self.transfer.screening_threshold,
            hidden_width: self.transfer.screening_hidden,
            learning_rate: self.transfer.screening_learning_rate,
            seed,
        }
    }
}
