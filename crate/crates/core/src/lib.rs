//! End-to-end hierarchical, multi-label classification of autonomous systems.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`taxonomy`]: the two-level label schema with gating and exclusivity rules
//! - [`ingest`]: parsers for the five external data sources and the priority merge
//! - [`features`]: numeric/categorical feature vectors and semantic contexts
//! - [`llm`]: batched prompting, response parsing and fine-tune corpus export
//! - [`svm`]: imputation, standardization, RBF-kernel max-margin models with
//!   probability calibration
//! - [`stacking`]: per-tag linear meta-classifiers fusing both branches
//! - [`eval`]: iterative stratification, nested CV selection and the metric suite
//! - [`corpus`]: annotated-corpus I/O and deterministic synthetic data
//! - [`pipeline`]: training orchestration, hierarchical inference and checkpointed
//!   batch classification

pub mod corpus;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod llm;
pub mod matrix;
pub mod pipeline;
pub mod stacking;
pub mod svm;
pub mod taxonomy;

pub use matrix::DenseMatrix;
pub use taxonomy::{CategoryNode, Level, TagId, TagSet, Taxonomy};
