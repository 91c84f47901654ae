//! Channel-adaptive EEG seizure prediction.
//!
//! `eeg_io` reads and writes recordings, `pipeline` turns them into labelled
//! windows, `chansel` ranks channels with a PCA + SMOTE + decision-tree
//! classifier, and `model` trains a small convolution + Mamba network on the
//! chosen channels using the autodiff engine in `nn`.

pub mod chansel;
pub mod cli;
pub mod eeg_io;
pub mod mlcore;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod scalar;

pub use scalar::Real;

/// Network tensors in training precision.
pub type Tensor = nn::Tensor<f32>;
/// Network tensors in double precision, used for gradient checks.
pub type Tensor64 = nn::Tensor<f64>;
/// Feature matrices for the classical pipeline.
pub type Matrix = mlcore::Matrix<f64>;
pub type Model = model::Model<f32>;
pub type TrainState = model::TrainState<f32>;
