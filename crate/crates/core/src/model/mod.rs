//! The seizure-prediction network: configuration, construction, training
//! and cross-validated evaluation.

mod config;
mod eval;
mod net;
mod train;

pub use config::{ModelConfig, PARAM_BUDGET};
pub use eval::{
    channel_sweep, dataset_hash, evaluate, gather, metrics_csv, run_manifest, sweep_csv, EvalResult, FoldTrainer,
    NetTrainer, SweepRow,
};
pub use net::{build_model, Forward, Model};
pub use train::{EpochStats, TrainData, TrainState};

use thiserror::Error;

use crate::chansel::ChanselError;
use crate::mlcore::MlError;
use crate::nn::NnError;
use crate::pipeline::PipelineError;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("model has {0} parameters, over the budget of 25000")]
    BudgetExceeded(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Chansel(#[from] ChanselError),
}
