//! Model artifact serialization: a single versioned JSON container, pretty
//! printed so artifacts diff cleanly and identical training runs produce
//! byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, PipelineModel};

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArtifactDocument {
    schema_version: u32,
    seed: u64,
    model: PipelineModel,
}

pub fn model_to_bytes(model: &PipelineModel) -> Result<Vec<u8>, PipelineError> {
    let document = ArtifactDocument {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        seed: model.seed,
        model: model.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&document)
        .map_err(|e| PipelineError::Artifact(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn save_model(model: &PipelineModel, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    std::fs::write(path, model_to_bytes(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PipelineModel, PipelineError> {
    let bytes = std::fs::read(path)?;
    let document: ArtifactDocument =
        serde_json::from_slice(&bytes).map_err(|e| PipelineError::Artifact(e.to_string()))?;
    if document.schema_version != ARTIFACT_SCHEMA_VERSION {
        return Err(PipelineError::ArtifactVersion {
            expected: ARTIFACT_SCHEMA_VERSION,
            found: document.schema_version,
        });
    }
    Ok(document.model)
}
