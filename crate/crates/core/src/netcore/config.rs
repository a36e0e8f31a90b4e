use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvStage {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Convolutional encoder: conv stages with rectifiers, then a global average pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub stages: Vec<ConvStage>,
    pub representation_width: usize,
    /// Per-sample normalization of the pooled representation.
    #[serde(default)]
    pub sample_norm: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::desk(64)
    }
}

impl EncoderConfig {
    /// Four stride-2 stages of 16, 32, 64, 64 filters over `size × size` colour input.
    pub fn desk(size: usize) -> Self {
        let stage = |filters| ConvStage {
            filters,
            kernel: 3,
            stride: 2,
        };
        Self {
            channels: 3,
            height: size,
            width: size,
            stages: vec![stage(16), stage(32), stage(64), stage(64)],
            representation_width: 64,
            sample_norm: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::NetworkConfig(m));
        if self.channels != 3 {
            return bad(format!("encoder expects 3 colour channels, got {}", self.channels));
        }
        if self.height == 0 || self.width == 0 {
            return bad("input size must be positive".into());
        }
        if self.stages.is_empty() {
            return bad("encoder needs at least one conv stage".into());
        }
        if self.representation_width < 16 {
            return bad(format!(
                "representation width {} below minimum 16",
                self.representation_width
            ));
        }
        let (mut h, mut w) = (self.height, self.width);
        for (i, s) in self.stages.iter().enumerate() {
            if s.filters == 0 || s.kernel == 0 || s.stride == 0 {
                return bad(format!("stage {i} has a zero dimension"));
            }
            if s.kernel % 2 == 0 {
                return bad(format!("stage {i}: kernel must be odd"));
            }
            let pad = s.kernel / 2;
            if h + 2 * pad < s.kernel || w + 2 * pad < s.kernel {
                return bad(format!("stage {i}: input {h}x{w} smaller than kernel"));
            }
            h = (h + 2 * pad - s.kernel) / s.stride + 1;
            w = (w + 2 * pad - s.kernel) / s.stride + 1;
        }
        let last = self.stages.last().map(|s| s.filters).unwrap_or(0);
        if last != self.representation_width {
            return bad(format!(
                "last stage has {last} filters but representation width is {}",
                self.representation_width
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    Projection,
    ContrastivePredictor,
    SupervisedPredictor,
    /// Single-logit head used by the direct baseline.
    Classifier,
}

/// Fully connected head: hidden rectifier layers then a linear output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    pub kind: HeadKind,
    pub hidden: Vec<usize>,
    pub output_width: usize,
}

impl HeadConfig {
    pub fn new(kind: HeadKind, hidden: Vec<usize>, output_width: usize) -> Self {
        Self {
            kind,
            hidden,
            output_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_width == 0 || self.hidden.contains(&0) {
            return Err(Error::NetworkConfig(format!(
                "{:?} head has a zero-width layer",
                self.kind
            )));
        }
        if self.kind == HeadKind::Classifier && self.output_width != 1 {
            return Err(Error::NetworkConfig("classifier head must have one output".into()));
        }
        Ok(())
    }
}

/// Widths of the three heads attached to the online encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadsConfig {
    pub projection: HeadConfig,
    pub contrastive_predictor: HeadConfig,
    pub supervised_predictor: HeadConfig,
}

impl HeadsConfig {
    /// One hidden layer of 128 everywhere; projections of width 32.
    pub fn desk(answer_count: usize) -> Self {
        Self {
            projection: HeadConfig::new(HeadKind::Projection, vec![128], 32),
            contrastive_predictor: HeadConfig::new(HeadKind::ContrastivePredictor, vec![128], 32),
            supervised_predictor: HeadConfig::new(
                HeadKind::SupervisedPredictor,
                vec![128],
                answer_count,
            ),
        }
    }

    pub fn validate(&self, answer_count: usize) -> Result<()> {
        self.projection.validate()?;
        self.contrastive_predictor.validate()?;
        self.supervised_predictor.validate()?;
        let kinds = [
            (&self.projection, HeadKind::Projection),
            (&self.contrastive_predictor, HeadKind::ContrastivePredictor),
            (&self.supervised_predictor, HeadKind::SupervisedPredictor),
        ];
        for (h, k) in kinds {
            if h.kind != k {
                return Err(Error::NetworkConfig(format!(
                    "head slot for {k:?} holds a {:?} head",
                    h.kind
                )));
            }
        }
        if self.projection.output_width != self.contrastive_predictor.output_width {
            return Err(Error::NetworkConfig(format!(
                "projection width {} differs from predictor width {}",
                self.projection.output_width, self.contrastive_predictor.output_width
            )));
        }
        if self.supervised_predictor.output_width != answer_count {
            return Err(Error::NetworkConfig(format!(
                "supervised head width {} differs from answer count {answer_count}",
                self.supervised_predictor.output_width
            )));
        }
        Ok(())
    }
}
