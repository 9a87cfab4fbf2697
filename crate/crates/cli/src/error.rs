//! Error categories mapped to the documented exit codes.

use linnaeus_core::corpus::CorpusError;
use linnaeus_core::eval::EvalError;
use linnaeus_core::ingest::IngestError;
use linnaeus_core::llm::LlmError;
use linnaeus_core::pipeline::PipelineError;
use linnaeus_core::svm::SvmError;
use linnaeus_core::taxonomy::TaxonomyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid inputs (exit 3).
    #[error("{0}")]
    Data(String),
    /// Completion-backend failures (exit 4).
    #[error("{0}")]
    Backend(String),
    /// Everything else (exit 5).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Data(_) => 3,
            CliError::Backend(_) => 4,
            CliError::Internal(_) => 5,
        }
    }

    pub fn data(context: &str, error: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {error}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TaxonomyError> for CliError {
    fn from(e: TaxonomyError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Http(_) => CliError::Backend(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Backend(_) | LlmError::MissingApiKey(_) => CliError::Backend(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SvmError> for CliError {
    fn from(e: SvmError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Llm(inner) => inner.into(),
            PipelineError::Svm(inner) => inner.into(),
            PipelineError::Stacking(_) | PipelineError::Artifact(_) => {
                CliError::Internal(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}
