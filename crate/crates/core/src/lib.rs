//! Hybrid contrastive and Dirichlet-supervised representation learning for
//! galaxy morphology vote data.

pub mod augment;
pub mod byol;
pub mod config;
pub mod dirichlet;
pub mod error;
pub mod netcore;
pub mod optim;
pub mod probe;
pub mod raster;
pub mod rng;
pub mod schema;
pub mod special;
pub mod synthdata;
pub mod train;

pub use augment::AugmentPolicy;
pub use config::ExperimentConfig;
pub use byol::{HybridConfig, HybridModel, HybridState, LossBreakdown};
pub use dirichlet::DirichletPrediction;
pub use error::{Error, Result};
pub use netcore::{EncoderConfig, HeadsConfig, ParameterSet, Tensor};
pub use raster::Image;
pub use schema::{AnswerSchema, VoteRecord, VoteVector};
pub use synthdata::{Dataset, DatasetConfig, Split};
pub use probe::{ProbeConfig, ProbeResult, RepresentationMatrix};
pub use train::{TrainMode, TrainingConfig};
