//! One JSON file that configures every command.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::DatasetConfig;
use crate::estimator::{FeatureConfig, ModelConfig, TrainConfig};
use crate::synth::MidiNote;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub output_dir: Option<String>,
}

/// Space, note, sample rate and features live in the `dataset` section,
/// since the data fixes them for everything downstream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub paths: Paths,
}

impl GlobalConfig {
    /// The toy experiment: 1024 / 128 / 128 on the two-operator space.
    pub fn toy() -> Self {
        GlobalConfig {
            dataset: DatasetConfig::toy(),
            ..Self::default()
        }
    }

    pub fn space(&self) -> &str {
        &self.dataset.space
    }

    pub fn note(&self) -> MidiNote {
        self.dataset.note
    }

    pub fn sample_rate(&self) -> u32 {
        self.dataset.sample_rate
    }

    pub fn features(&self) -> FeatureConfig {
        self.dataset.features
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: GlobalConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// SHA-256 of the canonical JSON, ignoring `paths`.
    pub fn hash(&self) -> String {
        let canonical = GlobalConfig {
            paths: Paths::default(),
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash() {
        let cfg = GlobalConfig::toy();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = GlobalConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);

        let moved = GlobalConfig {
            paths: Paths {
                output_dir: Some("/elsewhere".into()),
            },
            ..cfg.clone()
        };
        assert_eq!(moved.hash(), cfg.hash());
        let reseeded = GlobalConfig { seed: 1, ..cfg.clone() };
        assert_ne!(reseeded.hash(), cfg.hash());
    }

    #[test]
    fn partial_files_take_defaults_and_unknown_keys_fail() {
        let cfg = GlobalConfig::from_json(r#"{"seed": 9, "train": {"epochs": 3}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.model, ModelConfig::default());
        let err = GlobalConfig::from_json(r#"{"train": {"epochz": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("epochz"), "{err}");
        assert!(GlobalConfig::from_json(r#"{"dataset": {"space": "fm9"}}"#).is_err());
    }
}
