//! Structured-feature classifier: k-nearest-neighbor imputation,
//! standardization, one-vs-rest maximum-margin models with an RBF kernel, and
//! sigmoid probability calibration.

pub mod impute;
pub mod kernel;
pub mod multilabel;
pub mod platt;
pub mod scale;
pub mod smo;

use thiserror::Error;

pub use impute::{fit_imputer, impute, ImputationModel};
pub use kernel::{kernel_matrix, rbf_kernel, Kernel};
pub use multilabel::{
    fit_multilabel_svm, svm_predict_proba, MultiLabelFitConfig, MultiLabelSvmModel, RbfSvmModel,
    TagModel,
};
pub use platt::{fit_platt, PlattCalibrator};
pub use scale::{fit_scaler, scale, ScalingModel};
pub use smo::{solve_smo, SmoConfig, SmoSolution};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("imputation requires k >= 1")]
    InvalidK,
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("labels must contain both classes")]
    OneClass,
    #[error("solver did not converge within {iterations} iterations{}", tag.as_deref().map(|t| format!(" (tag {t})")).unwrap_or_default())]
    NoConvergence { iterations: usize, tag: Option<String> },
    #[error("model has {expected} tags but {found} hyperparameter entries were given")]
    HyperArity { expected: usize, found: usize },
    #[error("label matrix has {found} rows for tag {tag}, expected {expected}")]
    LabelArity { tag: String, expected: usize, found: usize },
}
