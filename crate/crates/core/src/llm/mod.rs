//! Language-model stage: batched prompt construction, a pluggable completion
//! backend, fixed-schema response parsing and fine-tune corpus export.

pub mod backend;
pub mod finetune;
pub mod prompt;
pub mod response;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{TagId, TaxonomyError};

pub use backend::{predict_tags, ChatRequest, CompletionBackend, HttpBackend, LlmStats, MockBackend};
pub use finetune::{export_finetune_corpus, write_finetune, FineTuneExample};
pub use prompt::{batch_contexts, build_prompt, PromptBatch, PromptLevel, MAX_BATCH};
pub use response::{parse_response, render_predictions, ParsedResponse};

/// Environment variable holding the backend API key.
pub const API_KEY_ENV: &str = "LINNAEUS_LLM_KEY";

/// Per-AS candidate-tag confidences plus the model's short rationale. The
/// rationale is stored for audit only and never enters the meta features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmPrediction {
    pub asn: u32,
    pub confidences: BTreeMap<TagId, f64>,
    pub rationale: String,
}

impl LlmPrediction {
    pub fn unlabeled(asn: u32) -> Self {
        LlmPrediction { asn, confidences: BTreeMap::new(), rationale: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_parallel: usize,
    pub retries: u32,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        // temperature 0 / top_p 1 make runs reproducible.
        BackendConfig {
            endpoint: String::new(),
            model: String::new(),
            temperature: 0.0,
            top_p: 1.0,
            max_parallel: 4,
            retries: 2,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("prompt batch must contain between 1 and {MAX_BATCH} items, got {0}")]
    BadBatchSize(usize),
    #[error("few-shot example uses label {0} which is not admissible at this level")]
    InadmissibleFewShot(TagId),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("response is missing asn {0}")]
    MissingAsn(u32),
    #[error("response contains unexpected asn {0}")]
    UnexpectedAsn(u32),
    #[error("response repeats asn {0}")]
    DuplicateAsn(u32),
    #[error("confidence {value} for label {label:?} of asn {asn} is outside [0, 1]")]
    ConfidenceOutOfRange { asn: u32, label: String, value: f64 },
    #[error("backend: {0}")]
    Backend(String),
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(&'static str),
    #[error("gold tag set for asn {asn} is invalid: {reason}")]
    InvalidGold { asn: u32, reason: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
