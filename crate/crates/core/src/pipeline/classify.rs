//! Hierarchical inference and checkpointed full-dataset classification.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HierarchicalPrediction, PipelineError, PipelineModel, PredictionFlag};
use crate::features::{build_network_features, build_semantic_context, SemanticContext};
use crate::ingest::{read_merged, MergedAsRecord};
use crate::llm::{predict_tags, CompletionBackend, LlmPrediction, PromptLevel};
use crate::matrix::DenseMatrix;
use crate::stacking::{build_meta_features, stacked_predict};
use crate::svm::svm_predict_proba;
use crate::taxonomy::{TagId, TagSet, Taxonomy};

fn check_taxonomy(model: &PipelineModel, taxonomy: &Taxonomy) -> Result<(), PipelineError> {
    if model.taxonomy_name != taxonomy.name() || model.taxonomy_version != taxonomy.version() {
        return Err(PipelineError::TaxonomyMismatch {
            model_name: model.taxonomy_name.clone(),
            model_version: model.taxonomy_version.clone(),
            found_name: taxonomy.name().to_string(),
            found_version: taxonomy.version().to_string(),
        });
    }
    Ok(())
}

/// Resolves sub-level confidences into a sub tag set: confidences at or above
/// the threshold are kept, and within an exclusivity group only the strongest
/// candidate survives (ties break toward the lexicographically first tag).
fn decide_sub_tags(
    taxonomy: &Taxonomy,
    confidences: &BTreeMap<TagId, f64>,
    threshold: f64,
) -> TagSet {
    let mut winners: BTreeMap<&str, (TagId, f64)> = BTreeMap::new();
    let mut out = TagSet::new();
    for (tag, &confidence) in confidences {
        if confidence < threshold {
            continue;
        }
        match taxonomy.node(tag).and_then(|n| n.exclusivity_group.as_deref()) {
            None => {
                out.insert(tag.clone());
            }
            Some(group) => match winners.get(group) {
                Some((_, best)) if *best >= confidence => {}
                _ => {
                    winners.insert(group, (tag.clone(), confidence));
                }
            },
        }
    }
    for (tag, _) in winners.into_values() {
        out.insert(tag);
    }
    out
}

/// Classifies a batch of merged records: structured and semantic branches are
/// fused per AS, then each assigned top tag with sub-tags gates one
/// sub-classifier call over its admissible candidates only.
pub fn classify(
    model: &PipelineModel,
    taxonomy: &Taxonomy,
    records: &[MergedAsRecord],
    backend: &dyn CompletionBackend,
) -> Result<Vec<HierarchicalPrediction>, PipelineError> {
    check_taxonomy(model, taxonomy)?;
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let top_tags = model.stacked.tags.clone();

    // Structured branch, one matrix pass.
    let features: Vec<Vec<f64>> = records
        .iter()
        .map(|r| build_network_features(r, model.encoding()).values)
        .collect();
    let x = DenseMatrix::from_rows(&features);
    let svm_probs = svm_predict_proba(&model.svm, &x)?;

    // Semantic branch for the eligible records. Each level is prompted with
    // its own model reference (the per-category sub-models may be distinct
    // fine-tuned instances).
    let level_config = |model_id: &str| {
        let mut config = model.config.backend.clone();
        config.model = model_id.to_string();
        config
    };
    let contexts: Vec<SemanticContext> =
        records.iter().filter_map(build_semantic_context).collect();
    let (llm_predictions, llm_stats) = predict_tags(
        backend,
        &level_config(&model.top_llm.model),
        &PromptLevel::Top,
        taxonomy,
        &model.top_llm.few_shot,
        &contexts,
    )?;
    let llm_by_asn: BTreeMap<u32, &LlmPrediction> =
        llm_predictions.iter().map(|p| (p.asn, p)).collect();
    let failed: std::collections::BTreeSet<u32> =
        llm_stats.failed_asns.iter().copied().collect();

    // Fuse and decide the top level.
    let mut predictions = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let mut flags = Vec::new();
        let llm_conf = match llm_by_asn.get(&record.asn) {
            Some(p) => {
                if failed.contains(&record.asn) {
                    flags.push(PredictionFlag::LlmFailed);
                }
                p.confidences.clone()
            }
            None => {
                flags.push(PredictionFlag::SvmOnly);
                BTreeMap::new()
            }
        };
        let svm_map: BTreeMap<TagId, f64> = top_tags
            .iter()
            .enumerate()
            .map(|(t, tag)| (tag.clone(), svm_probs.get(i, t)))
            .collect();
        let meta = build_meta_features(&top_tags, &llm_conf, &svm_map)?;
        let (top, probs) = stacked_predict(&model.stacked, &meta)?;
        if top.is_empty() {
            flags.push(PredictionFlag::TopUnlabeled);
        }
        flags.sort();
        flags.dedup();
        predictions.push(HierarchicalPrediction {
            asn: record.asn,
            top_tags: top,
            sub_tags: TagSet::new(),
            probs,
            flags,
        });
    }

    // Gated sub-classification, batched per category.
    let context_by_asn: BTreeMap<u32, SemanticContext> =
        contexts.into_iter().map(|c| (c.asn, c)).collect();
    for category in taxonomy.top_tags() {
        if taxonomy.subtags_of(&category)?.is_empty() {
            continue;
        }
        let member_indices: Vec<usize> = predictions
            .iter()
            .enumerate()
            .filter(|(_, p)| p.top_tags.contains(&category))
            .map(|(i, _)| i)
            .collect();
        let eligible: Vec<(usize, SemanticContext)> = member_indices
            .iter()
            .filter_map(|&i| {
                context_by_asn.get(&predictions[i].asn).map(|c| (i, c.clone()))
            })
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let sub_ref = model.sub_llm.get(&category);
        let few_shot = sub_ref.map(|r| r.few_shot.as_slice()).unwrap_or(&[]);
        let sub_config = level_config(
            sub_ref.map(|r| r.model.as_str()).unwrap_or(&model.config.backend.model),
        );
        let batch_contexts: Vec<SemanticContext> =
            eligible.iter().map(|(_, c)| c.clone()).collect();
        let (sub_predictions, sub_stats) = predict_tags(
            backend,
            &sub_config,
            &PromptLevel::Sub(category.clone()),
            taxonomy,
            few_shot,
            &batch_contexts,
        )?;
        let sub_failed: std::collections::BTreeSet<u32> =
            sub_stats.failed_asns.iter().copied().collect();
        for ((index, _), sub) in eligible.iter().zip(&sub_predictions) {
            let decided = decide_sub_tags(taxonomy, &sub.confidences, model.config.threshold);
            for tag in decided {
                predictions[*index].probs.insert(tag.clone(), sub.confidences[&tag]);
                predictions[*index].sub_tags.insert(tag);
            }
            if sub_failed.contains(&sub.asn)
                && !predictions[*index].flags.contains(&PredictionFlag::LlmFailed)
            {
                predictions[*index].flags.push(PredictionFlag::LlmFailed);
                predictions[*index].flags.sort();
            }
        }
    }

    // Every emitted prediction keeps the hierarchy consistent.
    for p in &predictions {
        debug_assert!(
            p.sub_tags.is_subset(&taxonomy.admissible_subtags(&p.top_tags)?),
            "sub tags must stay within the open gates"
        );
        debug_assert!(taxonomy.validate_tagset(&p.top_tags.union(&p.sub_tags))?.is_empty());
    }
    Ok(predictions)
}

/// Per-tag counts and tag-multiplicity histogram over a classification run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamespaceSummary {
    pub total: u64,
    pub per_tag: BTreeMap<TagId, u64>,
    pub unlabeled: u64,
    pub single_tag: u64,
    pub two_tags: u64,
    pub three_or_more_tags: u64,
}

impl NamespaceSummary {
    fn add(&mut self, prediction: &HierarchicalPrediction) {
        self.total += 1;
        for tag in prediction.top_tags.iter().chain(prediction.sub_tags.iter()) {
            *self.per_tag.entry(tag.clone()).or_insert(0) += 1;
        }
        match prediction.top_tags.len() {
            0 => self.unlabeled += 1,
            1 => self.single_tag += 1,
            2 => self.two_tags += 1,
            _ => self.three_or_more_tags += 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u32,
    dataset_digest: String,
    completed: usize,
    output_bytes: u64,
    summary: NamespaceSummary,
}

const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone)]
pub struct NamespaceOptions {
    /// Records per checkpointed chunk.
    pub checkpoint_every: usize,
}

impl Default for NamespaceOptions {
    fn default() -> Self {
        NamespaceOptions { checkpoint_every: 1000 }
    }
}

fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(
            &serde_json::to_vec(checkpoint).map_err(|e| PipelineError::Checkpoint(e.to_string()))?,
        )?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Streaming classification of a merged dataset file with periodic, resumable
/// checkpoints. Writes one prediction per line to `output_path`; a rerun after
/// an interruption picks up at the last checkpoint and produces output
/// identical to an uninterrupted run.
pub fn classify_namespace(
    model: &PipelineModel,
    taxonomy: &Taxonomy,
    dataset_path: &Path,
    backend: &dyn CompletionBackend,
    output_path: &Path,
    checkpoint_path: &Path,
    options: &NamespaceOptions,
) -> Result<NamespaceSummary, PipelineError> {
    check_taxonomy(model, taxonomy)?;
    let bytes = std::fs::read(dataset_path)?;
    let digest = format!("{:x}", Sha256::digest(&bytes));
    let records = read_merged(std::io::Cursor::new(&bytes))?;

    let (mut completed, mut summary) = match std::fs::read(checkpoint_path) {
        Ok(raw) => {
            let checkpoint: Checkpoint = serde_json::from_slice(&raw)
                .map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
            if checkpoint.schema_version != CHECKPOINT_SCHEMA {
                return Err(PipelineError::Checkpoint(format!(
                    "schema version {} unsupported",
                    checkpoint.schema_version
                )));
            }
            if checkpoint.dataset_digest != digest {
                return Err(PipelineError::CheckpointMismatch {
                    checkpoint: checkpoint.dataset_digest,
                    dataset: digest,
                });
            }
            // Re-align the output with the checkpoint before appending.
            let file = std::fs::OpenOptions::new().write(true).open(output_path)?;
            file.set_len(checkpoint.output_bytes)?;
            file.sync_all()?;
            (checkpoint.completed, checkpoint.summary)
        }
        Err(_) => {
            std::fs::write(output_path, b"")?;
            (0, NamespaceSummary::default())
        }
    };

    let mut output = std::fs::OpenOptions::new().append(true).open(output_path)?;
    while completed < records.len() {
        let end = (completed + options.checkpoint_every).min(records.len());
        let chunk = &records[completed..end];
        let predictions = classify(model, taxonomy, chunk, backend)?;
        for prediction in &predictions {
            serde_json::to_writer(&mut output, prediction)
                .map_err(|e| PipelineError::Artifact(e.to_string()))?;
            output.write_all(b"\n")?;
            summary.add(prediction);
        }
        output.flush()?;
        output.sync_all()?;
        completed = end;
        write_checkpoint(
            checkpoint_path,
            &Checkpoint {
                schema_version: CHECKPOINT_SCHEMA,
                dataset_digest: digest.clone(),
                completed,
                output_bytes: output.metadata()?.len(),
                summary: summary.clone(),
            },
        )?;
    }
    Ok(summary)
}

/// Reads a prediction file written by [`classify_namespace`].
pub fn read_predictions(input: impl BufRead) -> Result<Vec<HierarchicalPrediction>, PipelineError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| PipelineError::Artifact(e.to_string()))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticSpec};
    use crate::llm::{ChatRequest, CompletionBackend, LlmError, MockBackend};
    use crate::pipeline::{train_pipeline, TrainConfig};
    use crate::taxonomy::builtin;

    /// Delegates to the mock while recording the first line of every prompt,
    /// which names the level being classified.
    struct RecordingBackend {
        inner: MockBackend,
        prompts: Mutex<Vec<String>>,
    }

    impl CompletionBackend for RecordingBackend {
        fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
            let first_line = request.user.lines().next().unwrap_or_default().to_string();
            self.prompts.lock().unwrap().push(first_line);
            self.inner.complete(request)
        }
    }

    #[test]
    fn sub_classifiers_run_only_for_assigned_gated_categories() {
        let tax = builtin::default_taxonomy();
        let spec = SyntheticSpec::default_for(&tax, 6, 11);
        let data = generate_synthetic(&spec, &tax).unwrap();
        let backend = MockBackend::new(data.mock_table.clone());
        let mut config = TrainConfig { seed: 11, ..Default::default() };
        config.grid_c = vec![10.0];
        config.grid_gamma = vec![0.5];
        config.backend.model = "mock".into();
        let trained =
            train_pipeline(&data.corpus, &data.merged, &tax, &backend, &config).unwrap();

        // Classify ixp rows (a leaf category) plus one nameless record.
        let mut records: Vec<MergedAsRecord> = data
            .merged
            .iter()
            .filter(|r| r.as_name.as_deref().is_some_and(|n| n.to_lowercase().contains("ixp")))
            .cloned()
            .collect();
        let mut nameless = data.merged[0].clone();
        nameless.asn = 999_999;
        nameless.as_name = None;
        nameless.org_name = None;
        records.push(nameless);

        let recording = RecordingBackend {
            inner: MockBackend::new(data.mock_table.clone()),
            prompts: Mutex::new(Vec::new()),
        };
        let predictions = classify(&trained.model, &tax, &records, &recording).unwrap();

        let prompts = recording.prompts.lock().unwrap();
        assert!(
            prompts.iter().all(|p| !p.contains("the ixp category")),
            "leaf categories must never gate a sub-classifier call: {prompts:?}"
        );
        for p in prompts.iter() {
            if let Some(rest) = p.strip_prefix("Each autonomous system below is already known to belong to the ") {
                let category = rest.split_whitespace().next().unwrap();
                assert!(
                    predictions.iter().any(|pred| pred.top_tags.contains(
                        &crate::taxonomy::TagId::new(category).unwrap()
                    )),
                    "sub prompt for {category} without any assigned member"
                );
            }
        }

        let fallback = predictions.iter().find(|p| p.asn == 999_999).unwrap();
        assert!(fallback.flags.contains(&PredictionFlag::SvmOnly));
        // The structured branch still voted; probabilities exist for every tag.
        assert!(fallback.probs.len() >= trained.model.stacked.tags.len());
    }

    #[test]
    fn empty_dataset_yields_empty_output_and_zeroed_summary() {
        let tax = builtin::default_taxonomy();
        let spec = SyntheticSpec::default_for(&tax, 4, 2);
        let data = generate_synthetic(&spec, &tax).unwrap();
        let backend = MockBackend::new(data.mock_table.clone());
        let mut config = TrainConfig { seed: 2, ..Default::default() };
        config.grid_c = vec![10.0];
        config.grid_gamma = vec![0.5];
        config.backend.model = "mock".into();
        let trained =
            train_pipeline(&data.corpus, &data.merged, &tax, &backend, &config).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let dataset = dir.path().join("empty.ldjson");
        std::fs::write(&dataset, format!("{}\n", crate::ingest::MERGED_SCHEMA_HEADER)).unwrap();
        let summary = classify_namespace(
            &trained.model,
            &tax,
            &dataset,
            &backend,
            &dir.path().join("out.ldjson"),
            &dir.path().join("ckpt"),
            &NamespaceOptions::default(),
        )
        .unwrap();
        assert_eq!(summary, NamespaceSummary::default());
        assert_eq!(std::fs::read(dir.path().join("out.ldjson")).unwrap(), b"");
    }
}
