use std::collections::BTreeMap;
use std::path::Path;

use linnaeus_core::corpus::load_corpus;
use linnaeus_core::features::build_semantic_context;
use linnaeus_core::llm::{export_finetune_corpus, write_finetune, PromptLevel};
use linnaeus_core::taxonomy::TagSet;

use super::{ensure_out_dir, load_taxonomy, read_merged_file};
use crate::error::CliError;
use crate::manifest::Manifest;

/// Exports `finetune-top.jsonl` plus one `finetune-sub-<category>.jsonl` per
/// category that has annotated sub-tags.
pub fn run(taxonomy_spec: &str, corpus_path: &Path, merged_path: &Path, out: &Path) -> Result<(), CliError> {
    let taxonomy = load_taxonomy(taxonomy_spec)?;
    let corpus = load_corpus(corpus_path, &taxonomy)?;
    let merged = read_merged_file(merged_path)?;
    ensure_out_dir(out)?;

    let by_asn: BTreeMap<u32, &linnaeus_core::ingest::MergedAsRecord> =
        merged.iter().map(|r| (r.asn, r)).collect();
    let mut rows: Vec<(linnaeus_core::features::SemanticContext, TagSet)> = Vec::new();
    for row in &corpus.rows {
        let Some(record) = by_asn.get(&row.asn) else {
            return Err(CliError::Data(format!("corpus asn {} has no merged record", row.asn)));
        };
        if let Some(context) = build_semantic_context(record) {
            rows.push((context, row.tags.clone()));
        }
    }
    rows.sort_by_key(|(ctx, _)| ctx.asn);

    let mut manifest = Manifest::new("export-finetune");
    manifest.arg("taxonomy", taxonomy_spec);
    manifest.input(corpus_path)?;
    manifest.input(merged_path)?;

    let mut write_level = |name: String, level: &PromptLevel| -> Result<usize, CliError> {
        let examples = export_finetune_corpus(&rows, level, &taxonomy)?;
        if examples.is_empty() {
            return Ok(0);
        }
        let path = out.join(format!("finetune-{name}.jsonl"));
        let mut file = std::fs::File::create(&path)?;
        write_finetune(&examples, &mut file)?;
        manifest.output(&path)?;
        println!("{}: {} examples", path.display(), examples.len());
        Ok(examples.len())
    };

    let mut total = write_level("top".to_string(), &PromptLevel::Top)?;
    for top in taxonomy.top_tags() {
        if taxonomy.subtags_of(&top)?.is_empty() {
            continue;
        }
        total += write_level(format!("sub-{top}"), &PromptLevel::Sub(top.clone()))?;
    }
    manifest.write(out)?;
    println!("exported {total} fine-tune examples");
    Ok(())
}
