use std::path::Path;

use linnaeus_core::corpus::{generate_synthetic, save_corpus, SyntheticSpec};
use linnaeus_core::ingest::write_merged;

use super::{ensure_out_dir, load_taxonomy};
use crate::error::CliError;
use crate::manifest::Manifest;

/// Writes corpus.csv, merged.ldjson and mock-table.json for offline runs.
pub fn run(taxonomy_spec: &str, per_category: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let taxonomy = load_taxonomy(taxonomy_spec)?;
    let spec = SyntheticSpec::default_for(&taxonomy, per_category, seed);
    let data = generate_synthetic(&spec, &taxonomy)?;
    ensure_out_dir(out)?;

    let corpus_path = out.join("corpus.csv");
    save_corpus(&data.corpus, &corpus_path)?;
    let merged_path = out.join("merged.ldjson");
    let mut file = std::fs::File::create(&merged_path)?;
    write_merged(&data.merged, &mut file)?;
    let table_path = out.join("mock-table.json");
    let mut text = serde_json::to_string_pretty(&data.mock_table)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(&table_path, text)?;

    let mut manifest = Manifest::new("synth");
    manifest
        .arg("taxonomy", taxonomy_spec)
        .arg("per_category", per_category)
        .arg("seed", seed);
    manifest.output(&corpus_path)?;
    manifest.output(&merged_path)?;
    manifest.output(&table_path)?;
    manifest.write(out)?;

    println!(
        "generated {} annotated ASes across {} categories into {}",
        data.corpus.rows.len(),
        taxonomy.top_tags().len(),
        out.display()
    );
    Ok(())
}
