//! Classical ML used by channel selection: PCA, SMOTE, a CART decision tree
//! and binary classification metrics.

mod linalg;
mod matrix;
mod metrics;
mod pca;
mod smote;
mod tree;

pub use linalg::{symmetric_eigen_top, SymmetricEigen};
pub use matrix::Matrix;
pub use metrics::{compute_metrics, MetricsReport};
pub use pca::{pca_fit, pca_transform, Components, PcaModel};
pub use smote::smote;
pub use tree::{tree_fit, tree_predict, DecisionTree, TreeNode};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MlError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("shape mismatch: expected {expected} columns, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("SMOTE needs at least 2 minority rows, got {0}")]
    TooFewMinority(usize),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
}
