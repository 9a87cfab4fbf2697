//! End-to-end orchestration: training the top-level hybrid model, hierarchical
//! inference with gated sub-classifiers, and checkpointed batch classification
//! over a full merged dataset.

pub mod artifact;
pub mod classify;
pub mod train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::eval::EvalError;
use crate::features::{CategoricalEncoding, SemanticContext};
use crate::ingest::IngestError;
use crate::llm::{BackendConfig, LlmError};
use crate::stacking::{StackedModel, StackingError};
use crate::svm::{MultiLabelSvmModel, SvmError};
use crate::taxonomy::{TagId, TagSet, TaxonomyError};

pub use artifact::{load_model, save_model, ARTIFACT_SCHEMA_VERSION};
pub use classify::{classify, classify_namespace, NamespaceOptions, NamespaceSummary};
pub use train::{train_pipeline, TrainOutput, TrainReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("corpus asn {0} has no merged record")]
    MissingMergedRecord(u32),
    #[error("model was trained for taxonomy {model_name} v{model_version}, got {found_name} v{found_version}")]
    TaxonomyMismatch {
        model_name: String,
        model_version: String,
        found_name: String,
        found_version: String,
    },
    #[error("model artifact has schema version {found}, this build reads {expected}")]
    ArtifactVersion { expected: u32, found: u32 },
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("checkpoint does not match the dataset (digest {checkpoint} vs {dataset})")]
    CheckpointMismatch { checkpoint: String, dataset: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Stacking(#[from] StackingError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Reference to one fine-tuned (or mock) language model plus the few-shot
/// exemplars used when prompting it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmModelRef {
    pub model: String,
    pub few_shot: Vec<(SemanticContext, TagSet)>,
}

/// Training configuration; the snapshot is stored inside the model artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub folds: usize,
    pub finetune_fraction: f64,
    pub grid_c: Vec<f64>,
    /// Empty means the default grid including 1/dimension.
    pub grid_gamma: Vec<f64>,
    pub beta: f64,
    pub threshold: f64,
    pub few_shot: usize,
    pub impute_k: usize,
    pub backend: BackendConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            folds: 3,
            finetune_fraction: 0.7,
            grid_c: vec![0.1, 1.0, 10.0, 100.0],
            grid_gamma: Vec::new(),
            beta: 0.5,
            threshold: 0.5,
            few_shot: 3,
            impute_k: 5,
            backend: BackendConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Gamma candidates; the default grid adapts 1/d to the feature width.
    pub fn gamma_grid(&self, dimension: usize) -> Vec<f64> {
        let mut grid = if self.grid_gamma.is_empty() {
            vec![1.0 / dimension.max(1) as f64, 0.01, 0.1, 1.0]
        } else {
            self.grid_gamma.clone()
        };
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        grid
    }
}

/// The trained pipeline: taxonomy reference, fitted preprocessing and models,
/// per-category sub-model references, config snapshot and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub taxonomy_name: String,
    pub taxonomy_version: String,
    pub seed: u64,
    pub svm: MultiLabelSvmModel,
    pub stacked: StackedModel,
    pub top_llm: LlmModelRef,
    pub sub_llm: BTreeMap<TagId, LlmModelRef>,
    pub config: TrainConfig,
}

impl PipelineModel {
    pub fn encoding(&self) -> &CategoricalEncoding {
        &self.svm.encoding
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionFlag {
    /// No top-level tag reached the decision threshold.
    TopUnlabeled,
    /// The language model fell back to unlabeled for this AS.
    LlmFailed,
    /// The AS had no usable names; only the structured branch voted.
    SvmOnly,
}

/// Final output for one AS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPrediction {
    pub asn: u32,
    pub top_tags: TagSet,
    pub sub_tags: TagSet,
    pub probs: BTreeMap<TagId, f64>,
    pub flags: Vec<PredictionFlag>,
}
