use std::path::PathBuf;

use linnaeus_core::pipeline::{classify_namespace, load_model, NamespaceOptions};

use super::{ensure_out_dir, load_taxonomy};
use crate::backend::make_backend;
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::BackendArgs;

pub struct ClassifyArgs {
    pub taxonomy: String,
    pub model: PathBuf,
    pub merged: PathBuf,
    pub backend: BackendArgs,
    pub resume: bool,
    pub checkpoint_every: usize,
    pub out: PathBuf,
}

pub fn run(args: ClassifyArgs) -> Result<(), CliError> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let model = load_model(&args.model)?;
    let backend = make_backend(&args.backend, &taxonomy)?;
    ensure_out_dir(&args.out)?;

    let predictions_path = args.out.join("predictions.ldjson");
    let checkpoint_path = args.out.join("classify.checkpoint");
    if !args.resume && checkpoint_path.exists() {
        std::fs::remove_file(&checkpoint_path)?;
    }

    let options = NamespaceOptions { checkpoint_every: args.checkpoint_every.max(1) };
    let summary = classify_namespace(
        &model,
        &taxonomy,
        &args.merged,
        backend.as_ref(),
        &predictions_path,
        &checkpoint_path,
        &options,
    )?;

    let summary_path = args.out.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(&summary_path, text)?;

    let mut manifest = Manifest::new("classify");
    manifest
        .arg("taxonomy", &args.taxonomy)
        .arg("resume", args.resume)
        .arg("checkpoint_every", args.checkpoint_every)
        .arg("mock", args.backend.mock);
    manifest.input(&args.model)?;
    manifest.input(&args.merged)?;
    manifest.output(&predictions_path)?;
    manifest.output(&summary_path)?;
    manifest.write(&args.out)?;

    println!(
        "classified {} ASes: {} single-tag, {} two-tag, {} three-or-more, {} unlabeled",
        summary.total, summary.single_tag, summary.two_tags, summary.three_or_more_tags, summary.unlabeled,
    );
    println!("predictions written to {}", predictions_path.display());
    Ok(())
}
