use std::path::PathBuf;

use thiserror::Error;

use crate::byol::LossBreakdown;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("vote encoding error: {0}")]
    Encoding(String),

    #[error("likelihood domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activation in layer `{layer}`")]
    NonFiniteActivation { layer: String },

    #[error("backward called without a forward cache")]
    MissingCache,

    #[error("invalid network config: {0}")]
    NetworkConfig(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite loss (contrastive={}, supervised={}, combined={})", .0.contrastive, .0.supervised, .0.combined)]
    NonFiniteLoss(LossBreakdown),

    #[error("training error: {0}")]
    Training(String),

    #[error("augmentation error: {0}")]
    Augment(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("catalog validation failed: {0}")]
    Catalog(String),

    #[error("image for galaxy `{id}` unavailable at {path}: {reason}")]
    MissingImage {
        id: String,
        path: PathBuf,
        reason: String,
    },

    #[error("probe error: {0}")]
    Probe(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by numerics rather than inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss(_) | Error::NonFiniteActivation { .. }
        )
    }
}
