pub mod classify;
pub mod evaluate;
pub mod export_finetune;
pub mod ingest;
pub mod stats;
pub mod synth;
pub mod train;

use std::path::Path;

use linnaeus_core::taxonomy::{builtin, Taxonomy};

use crate::error::CliError;

/// Resolves `--taxonomy`: a builtin name first, then a file path.
pub fn load_taxonomy(spec: &str) -> Result<Taxonomy, CliError> {
    if builtin::names().contains(&spec) {
        return Ok(builtin::load(spec)?);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Data(format!(
            "--taxonomy: {spec:?} is neither a builtin schema ({}) nor an existing file",
            builtin::names().join(", ")
        )));
    }
    Ok(Taxonomy::load(path)?)
}

pub fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::data("--out", e))?;
    Ok(())
}

pub fn read_merged_file(path: &Path) -> Result<Vec<linnaeus_core::ingest::MergedAsRecord>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::data("--merged", e))?;
    Ok(linnaeus_core::ingest::read_merged(std::io::BufReader::new(file))?)
}
