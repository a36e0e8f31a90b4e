//! Small differentiable encoder and head networks.

pub mod checkpoint;
mod config;
mod network;
mod params;
mod tensor;

pub use config::{ConvStage, EncoderConfig, HeadConfig, HeadKind, HeadsConfig};
pub use network::{Activations, Gradients, Network};
pub use params::ParameterSet;
pub use tensor::{Scalar, Tensor, TensorSpec};
