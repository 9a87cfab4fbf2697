//! Dataset splitting, cross-validated model selection and the metric suite.

pub mod metrics;
pub mod select;
pub mod stratify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::TagSet;

pub use metrics::{compute_metrics, f_beta, MetricsReport, TagMetrics};
pub use select::{hyper_grid, nested_cv_select, CvSelectionReport, HyperParams};
pub use stratify::{iterative_stratified_split, kfold_iterative, FoldAssignment};

/// One gold-annotated autonomous system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub asn: u32,
    pub tags: TagSet,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions and truth have different lengths ({predictions} vs {truth})")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("no samples to evaluate")]
    NoSamples,
    #[error("tag {0} appears in the data but not in the tag universe")]
    TagOutsideUniverse(crate::taxonomy::TagId),
    #[error("degenerate proportions: {0}")]
    DegenerateProportions(String),
    #[error("no examples to split")]
    EmptyExamples,
    #[error("duplicate asn {0} in examples")]
    DuplicateAsn(u32),
    #[error("cannot build {k} folds from {n} examples")]
    FoldTooLarge { k: usize, n: usize },
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("fold {0} is empty after assignment")]
    EmptyFold(usize),
    #[error("no candidates to select from")]
    NoCandidates,
    #[error("all {0} candidates failed to train")]
    AllCandidatesFailed(usize),
    #[error("candidate evaluation failed: {0}")]
    CandidateFailed(String),
}
