//! Dense tensors, a reverse-mode tape with the layer set of the network,
//! losses, Adam and the weight checkpoint format.

pub mod kernels;
pub mod loss;
mod mamba;
mod optim;
mod params;
pub mod scan;
mod tape;
mod tensor;

pub use kernels::{sigmoid, softplus};
pub use mamba::{mamba_block, ssm_scan, MambaConfig, MambaVars, SsmVars};
pub use optim::{adam_step, OptimState};
pub use params::{read_checkpoint, write_checkpoint, ParamStore, CHECKPOINT_MAGIC};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("contrastive loss: no anchor has a same-label partner in the batch")]
    NoPositives,
    #[error("graph cycle detected")]
    GraphCycle,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
