//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentPolicy;
use crate::byol::{LossDenominator, HybridConfig, SupervisedViews};
use crate::error::{Error, Result};
use crate::netcore::{EncoderConfig, HeadsConfig};
use crate::optim::AdamConfig;
use crate::probe::ProbeConfig;
use crate::schema::AnswerSchema;
use crate::synthdata::DatasetConfig;
use crate::train::{TrainMode, TrainingConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct DatasetSection {
    /// Directory written by `gen-data`; generated in memory when absent.
    pub path: Option<PathBuf>,
    pub generate: DatasetConfig,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub strong: AugmentPolicy,
    pub standard: AugmentPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveSection {
    pub lambda: f64,
    pub ema_decay: f64,
    pub denominator: LossDenominator,
    pub denominator_floor: f64,
    pub supervised_views: SupervisedViews,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        let h = HybridConfig::default();
        Self {
            lambda: h.lambda,
            ema_decay: h.ema_decay,
            denominator: h.denominator,
            denominator_floor: h.denominator_floor,
            supervised_views: h.supervised_views,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Schema document; the bundled synthetic schema when absent.
    pub schema: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub dataset: DatasetSection,
    pub encoder: EncoderConfig,
    /// Desk heads sized to the schema when absent.
    pub heads: Option<HeadsConfig>,
    pub objective: ObjectiveSection,
    pub optimizer: AdamConfig,
    pub training: TrainingConfig,
    pub augment: AugmentSection,
    pub probe: ProbeConfig,
}

impl Default for ExperimentConfig {
    /// Augmentation sizes are left for [`ExperimentConfig::resolve`].
    fn default() -> Self {
        Self {
            augment: AugmentSection::default(),
            ..Self::desk(64)
        }
    }
}

impl ExperimentConfig {
    /// Defaults for `size × size` images.
    pub fn desk(size: usize) -> Self {
        Self {
            seed: 0,
            schema: None,
            output_dir: PathBuf::from("runs"),
            dataset: DatasetSection {
                path: None,
                generate: DatasetConfig {
                    image_size: size,
                    ..DatasetConfig::default()
                },
            },
            encoder: EncoderConfig::desk(size),
            heads: None,
            objective: ObjectiveSection::default(),
            optimizer: AdamConfig::default(),
            training: TrainingConfig::default(),
            augment: AugmentSection {
                strong: AugmentPolicy::strong(size),
                standard: AugmentPolicy::standard(size),
            },
            probe: ProbeConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load_schema(&self) -> Result<AnswerSchema> {
        match &self.schema {
            Some(p) => AnswerSchema::load(p),
            None => Ok(AnswerSchema::synthetic()),
        }
    }

    /// Fills schema-dependent defaults.
    pub fn resolve(&mut self, schema: &AnswerSchema) {
        if self.heads.is_none() {
            self.heads = Some(HeadsConfig::desk(schema.answer_count()));
        }
        for p in [&mut self.augment.strong, &mut self.augment.standard] {
            if p.output_size == 0 {
                p.output_size = self.encoder.height;
            }
        }
    }

    pub fn hybrid(&self) -> HybridConfig {
        let o = &self.objective;
        HybridConfig {
            lambda: o.lambda,
            ema_decay: o.ema_decay,
            denominator: o.denominator,
            denominator_floor: o.denominator_floor,
            supervised_views: o.supervised_views,
            optimizer: self.optimizer,
        }
    }

    pub fn mode(&self) -> TrainMode {
        self.training.mode
    }

    /// Cross-section checks that the individual sections cannot make alone.
    pub fn validate(&self, schema: &AnswerSchema) -> Result<()> {
        self.encoder.validate()?;
        if let Some(h) = &self.heads {
            h.validate(schema.answer_count())?;
        }
        self.hybrid().validate()?;
        self.training.validate()?;
        self.augment.strong.validate()?;
        self.augment.standard.validate()?;
        self.probe.validate()?;
        for (name, p) in [("strong", &self.augment.strong), ("standard", &self.augment.standard)] {
            if p.output_size != self.encoder.height || p.output_size != self.encoder.width {
                return Err(Error::Config(format!(
                    "{name} augmentation output {} does not match encoder input {}x{}",
                    p.output_size, self.encoder.height, self.encoder.width
                )));
            }
        }
        if self.dataset.path.is_none() {
            self.dataset.generate.validate()?;
            if self.dataset.generate.image_size < self.encoder.height {
                return Err(Error::Config("generated images smaller than encoder input".into()));
            }
        } else if let Some(p) = &self.dataset.path {
            if !p.is_dir() {
                return Err(Error::Config(format!("dataset directory {} not found", p.display())));
            }
        }
        Ok(())
    }
}

impl Default for AugmentSection {
    /// Output sizes of 0 are filled from the encoder input by [`ExperimentConfig::resolve`].
    fn default() -> Self {
        Self {
            strong: AugmentPolicy::strong(0),
            standard: AugmentPolicy::standard(0),
        }
    }
}
