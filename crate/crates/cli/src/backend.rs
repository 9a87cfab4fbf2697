//! Backend selection shared by the train and classify subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use linnaeus_core::llm::{BackendConfig, CompletionBackend, HttpBackend, MockBackend};
use linnaeus_core::taxonomy::{TagId, Taxonomy};

use crate::error::CliError;
use crate::BackendArgs;

pub fn backend_config(args: &BackendArgs) -> BackendConfig {
    let model = if args.mock && args.model.is_empty() {
        "mock".to_string()
    } else {
        args.model.clone()
    };
    BackendConfig {
        endpoint: args.endpoint.clone(),
        model,
        max_parallel: args.max_parallel,
        retries: args.retries,
        timeout_secs: args.timeout_secs,
        ..Default::default()
    }
}

fn load_mock_table(path: &Path) -> Result<BTreeMap<String, TagId>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data("--mock-table", e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data("--mock-table", e))
}

/// `--mock` builds the deterministic keyword backend (from `--mock-table` or
/// the taxonomy-derived default); otherwise the HTTP backend reads its key
/// from the environment.
pub fn make_backend(
    args: &BackendArgs,
    taxonomy: &Taxonomy,
) -> Result<Box<dyn CompletionBackend>, CliError> {
    if args.mock {
        let table = match &args.mock_table {
            Some(path) => load_mock_table(path)?,
            None => linnaeus_core::corpus::synthetic::default_mock_table(taxonomy),
        };
        return Ok(Box::new(MockBackend::new(table)));
    }
    if args.endpoint.is_empty() {
        return Err(CliError::Data("--endpoint is required unless --mock is set".into()));
    }
    let http = HttpBackend::from_env(backend_config(args))?;
    Ok(Box::new(http))
}
