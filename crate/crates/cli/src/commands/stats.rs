use std::path::Path;

use linnaeus_core::corpus::{corpus_stats, load_corpus};

use super::{ensure_out_dir, load_taxonomy};
use crate::error::CliError;
use crate::manifest::Manifest;

pub fn run(taxonomy_spec: &str, corpus_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let taxonomy = load_taxonomy(taxonomy_spec)?;
    let corpus = load_corpus(corpus_path, &taxonomy)?;
    let stats = corpus_stats(&corpus, &taxonomy);
    print!("{}", stats.render_text());

    if let Some(out) = out {
        ensure_out_dir(out)?;
        let json_path = out.join("stats.json");
        let mut text = serde_json::to_string_pretty(&stats)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        std::fs::write(&json_path, text)?;
        let table_path = out.join("stats.txt");
        std::fs::write(&table_path, stats.render_text())?;

        let mut manifest = Manifest::new("stats");
        manifest.arg("taxonomy", taxonomy_spec);
        manifest.input(corpus_path)?;
        manifest.output(&json_path)?;
        manifest.output(&table_path)?;
        manifest.write(out)?;
    }
    Ok(())
}
