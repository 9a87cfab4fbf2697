//! Training orchestration.
//!
//! The annotated corpus is split 70/30 by iterative stratification: the larger
//! slice feeds the fine-tune exports and few-shot pools, the remaining slice
//! trains the structured model and the stacking layer under cross-validation
//! with nested hyperparameter search selected by macro F(beta). Meta features
//! for the stacking fit come from out-of-fold base-model outputs so the
//! meta-learner never sees probabilities produced by a model that trained on
//! the same rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LlmModelRef, PipelineError, PipelineModel, TrainConfig};
use crate::corpus::AnnotatedCorpus;
use crate::eval::{
    compute_metrics, iterative_stratified_split, kfold_iterative, nested_cv_select, CvSelectionReport,
    HyperParams, LabeledExample, MetricsReport,
};
use crate::features::{
    build_network_features, build_semantic_context, CategoricalEncoding, SemanticContext,
};
use crate::ingest::MergedAsRecord;
use crate::llm::{
    export_finetune_corpus, predict_tags, CompletionBackend, FineTuneExample, LlmPrediction,
    LlmStats, PromptLevel,
};
use crate::matrix::DenseMatrix;
use crate::stacking::{build_meta_features, fit_stacking, stacked_predict, StackingFitConfig};
use crate::svm::{fit_multilabel_svm, svm_predict_proba, MultiLabelFitConfig};
use crate::taxonomy::{Level, TagId, TagSet, Taxonomy};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub corpus_rows: usize,
    pub finetune_rows: usize,
    pub eval_rows: usize,
    pub selection: CvSelectionReport<HyperParams>,
    /// Held-out stacked metrics per outer fold.
    pub fold_reports: Vec<MetricsReport>,
    pub mean_macro_f_beta: f64,
    pub llm_stats: LlmStats,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub model: PipelineModel,
    pub report: TrainReport,
    /// (level name, examples) pairs: `top` plus one `sub-<category>` per
    /// category that has sub-tags in the fine-tune slice.
    pub finetune_exports: Vec<(String, Vec<FineTuneExample>)>,
}

struct EvalRow {
    example: LabeledExample,
    features: Vec<f64>,
    llm: BTreeMap<TagId, f64>,
}

fn per_tag_labels(tags: &[TagId], examples: &[&LabeledExample]) -> Vec<Vec<bool>> {
    tags.iter()
        .map(|tag| examples.iter().map(|ex| ex.tags.contains(tag)).collect())
        .collect()
}

fn select_few_shot(
    rows: &[(SemanticContext, TagSet)],
    level: &PromptLevel,
    taxonomy: &Taxonomy,
    budget: usize,
) -> Vec<(SemanticContext, TagSet)> {
    let mut out = Vec::new();
    for (context, tags) in rows {
        let projected: TagSet = match level {
            PromptLevel::Top => tags.at_level(taxonomy, Level::Top),
            PromptLevel::Sub(category) => {
                if !tags.contains(category) {
                    continue;
                }
                tags.iter()
                    .filter(|t| t.qualified_parent().as_ref() == Some(category))
                    .cloned()
                    .collect()
            }
        };
        if projected.is_empty() {
            continue;
        }
        out.push((context.clone(), projected));
        if out.len() == budget {
            break;
        }
    }
    out
}

pub fn train_pipeline(
    corpus: &AnnotatedCorpus,
    merged: &[MergedAsRecord],
    taxonomy: &Taxonomy,
    backend: &dyn CompletionBackend,
    config: &TrainConfig,
) -> Result<TrainOutput, PipelineError> {
    // Corpus rows must validate and be covered by the merged dataset.
    let by_asn: BTreeMap<u32, &MergedAsRecord> = merged.iter().map(|r| (r.asn, r)).collect();
    for row in &corpus.rows {
        taxonomy.check_tagset(&row.tags)?;
        if !by_asn.contains_key(&row.asn) {
            return Err(PipelineError::MissingMergedRecord(row.asn));
        }
    }

    // Fine-tune/eval split by iterative stratification.
    let examples = corpus.examples();
    let split = iterative_stratified_split(
        &examples,
        &[config.finetune_fraction, 1.0 - config.finetune_fraction],
        config.seed,
    )?;
    let finetune_examples: Vec<&LabeledExample> =
        examples.iter().filter(|ex| split.assignment[&ex.asn] == 0).collect();
    let eval_examples: Vec<LabeledExample> =
        examples.iter().filter(|ex| split.assignment[&ex.asn] == 1).cloned().collect();

    // Joined (context, gold) rows of the fine-tune slice, sorted by asn; they
    // feed both the exports and the few-shot pools.
    let mut finetune_rows: Vec<(SemanticContext, TagSet)> = finetune_examples
        .iter()
        .filter_map(|ex| {
            build_semantic_context(by_asn[&ex.asn]).map(|ctx| (ctx, ex.tags.clone()))
        })
        .collect();
    finetune_rows.sort_by_key(|(ctx, _)| ctx.asn);

    let mut finetune_exports = Vec::new();
    finetune_exports.push((
        "top".to_string(),
        export_finetune_corpus(&finetune_rows, &PromptLevel::Top, taxonomy)?,
    ));
    let mut sub_llm = BTreeMap::new();
    for top in taxonomy.top_tags() {
        if taxonomy.subtags_of(&top)?.is_empty() {
            continue;
        }
        let level = PromptLevel::Sub(top.clone());
        let exported = export_finetune_corpus(&finetune_rows, &level, taxonomy)?;
        if !exported.is_empty() {
            finetune_exports.push((format!("sub-{top}"), exported));
        }
        sub_llm.insert(
            top.clone(),
            LlmModelRef {
                model: config.backend.model.clone(),
                few_shot: select_few_shot(&finetune_rows, &level, taxonomy, config.few_shot),
            },
        );
    }
    let top_llm = LlmModelRef {
        model: config.backend.model.clone(),
        few_shot: select_few_shot(&finetune_rows, &PromptLevel::Top, taxonomy, config.few_shot),
    };

    // Feature encoding is fit on the slice the structured model trains on.
    let eval_records: Vec<&MergedAsRecord> =
        eval_examples.iter().map(|ex| by_asn[&ex.asn]).collect();
    let encoding = CategoricalEncoding::fit(
        &eval_records.iter().map(|r| (*r).clone()).collect::<Vec<_>>(),
    );

    // One language-model pass over the eval slice; ineligible records keep an
    // all-zero confidence block, mirroring inference.
    let contexts: Vec<SemanticContext> =
        eval_records.iter().filter_map(|r| build_semantic_context(r)).collect();
    let (llm_predictions, llm_stats) = predict_tags(
        backend,
        &config.backend,
        &PromptLevel::Top,
        taxonomy,
        &top_llm.few_shot,
        &contexts,
    )?;
    let llm_by_asn: BTreeMap<u32, &LlmPrediction> =
        llm_predictions.iter().map(|p| (p.asn, p)).collect();

    let rows: Vec<EvalRow> = eval_examples
        .iter()
        .zip(&eval_records)
        .map(|(ex, record)| EvalRow {
            example: ex.clone(),
            features: build_network_features(record, &encoding).values,
            llm: llm_by_asn
                .get(&ex.asn)
                .map(|p| p.confidences.clone())
                .unwrap_or_default(),
        })
        .collect();
    let row_by_asn: BTreeMap<u32, &EvalRow> = rows.iter().map(|r| (r.example.asn, r)).collect();

    let top_tags = taxonomy.top_tags();
    let dimension = encoding.width();
    let candidates = crate::eval::hyper_grid(&config.grid_c, &config.gamma_grid(dimension));

    // Nested CV: inner folds per candidate, scored by held-out macro F(beta).
    let fit_on = |asns: &[u32], hyper: HyperParams| -> Result<_, PipelineError> {
        let selected: Vec<&EvalRow> = asns.iter().map(|a| row_by_asn[a]).collect();
        let x = DenseMatrix::from_rows(
            &selected.iter().map(|r| r.features.clone()).collect::<Vec<_>>(),
        );
        let examples: Vec<&LabeledExample> = selected.iter().map(|r| &r.example).collect();
        let y = per_tag_labels(&top_tags, &examples);
        let mut fit_config =
            MultiLabelFitConfig::uniform(top_tags.len(), hyper.c, hyper.gamma);
        fit_config.impute_k = config.impute_k;
        Ok(fit_multilabel_svm(top_tags.clone(), &x, &y, encoding.clone(), &fit_config)?)
    };
    let predict_tagsets = |model: &crate::svm::MultiLabelSvmModel,
                           asns: &[u32]|
     -> Result<Vec<TagSet>, PipelineError> {
        let selected: Vec<&EvalRow> = asns.iter().map(|a| row_by_asn[a]).collect();
        let x = DenseMatrix::from_rows(
            &selected.iter().map(|r| r.features.clone()).collect::<Vec<_>>(),
        );
        let probs = svm_predict_proba(model, &x)?;
        Ok((0..x.rows())
            .map(|i| {
                top_tags
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| probs.get(i, *t) >= config.threshold)
                    .map(|(_, tag)| tag.clone())
                    .collect()
            })
            .collect())
    };

    let (best, selection) = nested_cv_select(
        &candidates,
        &eval_examples,
        config.folds,
        config.seed,
        config.beta,
        |candidate, train, test| {
            let model = fit_on(train, *candidate)
                .map_err(|e| crate::eval::EvalError::CandidateFailed(e.to_string()))?;
            let predicted = predict_tagsets(&model, test)
                .map_err(|e| crate::eval::EvalError::CandidateFailed(e.to_string()))?;
            let truth: Vec<TagSet> =
                test.iter().map(|a| row_by_asn[a].example.tags.at_level(taxonomy, Level::Top)).collect();
            let report = compute_metrics(&predicted, &truth, &top_tags)?;
            Ok(report.macro_f_beta(config.beta))
        },
    )?;

    // Out-of-fold SVM probabilities become the meta features.
    let outer = kfold_iterative(&eval_examples, config.folds, config.seed)?;
    let mut meta_by_asn: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (train, test) in outer.cv_splits() {
        let model = fit_on(&train, best)?;
        let selected: Vec<&EvalRow> = test.iter().map(|a| row_by_asn[a]).collect();
        let x = DenseMatrix::from_rows(
            &selected.iter().map(|r| r.features.clone()).collect::<Vec<_>>(),
        );
        let probs = svm_predict_proba(&model, &x)?;
        for (i, row) in selected.iter().enumerate() {
            let svm_map: BTreeMap<TagId, f64> = top_tags
                .iter()
                .enumerate()
                .map(|(t, tag)| (tag.clone(), probs.get(i, t)))
                .collect();
            let meta = build_meta_features(&top_tags, &row.llm, &svm_map)?;
            meta_by_asn.insert(row.example.asn, meta);
        }
    }

    // Stacked CV report: fit on two folds of meta rows, score the third.
    let stacking_config = StackingFitConfig {
        c: 1.0,
        tol: 1e-3,
        calibration_folds: config.folds,
        threshold: config.threshold,
    };
    let mut fold_reports = Vec::new();
    for (train, test) in outer.cv_splits() {
        let meta_train = DenseMatrix::from_rows(
            &train.iter().map(|a| meta_by_asn[a].clone()).collect::<Vec<_>>(),
        );
        let train_examples: Vec<&LabeledExample> =
            train.iter().map(|a| &row_by_asn[a].example).collect();
        let y = per_tag_labels(&top_tags, &train_examples);
        let stacked = fit_stacking(top_tags.clone(), &meta_train, &y, &stacking_config)?;
        let mut predicted = Vec::new();
        let mut truth = Vec::new();
        for asn in &test {
            let (set, _) = stacked_predict(&stacked, &meta_by_asn[asn])?;
            predicted.push(set);
            truth.push(row_by_asn[asn].example.tags.at_level(taxonomy, Level::Top));
        }
        fold_reports.push(compute_metrics(&predicted, &truth, &top_tags)?);
    }
    let mean_macro_f_beta = fold_reports
        .iter()
        .map(|r| r.macro_f_beta(config.beta))
        .sum::<f64>()
        / fold_reports.len().max(1) as f64;

    // Final models on the full eval slice / full meta set.
    let all_asns: Vec<u32> = eval_examples.iter().map(|ex| ex.asn).collect();
    let svm = fit_on(&all_asns, best)?;
    let meta_x = DenseMatrix::from_rows(
        &all_asns.iter().map(|a| meta_by_asn[a].clone()).collect::<Vec<_>>(),
    );
    let example_refs: Vec<&LabeledExample> =
        all_asns.iter().map(|a| &row_by_asn[a].example).collect();
    let y = per_tag_labels(&top_tags, &example_refs);
    let stacked = fit_stacking(top_tags.clone(), &meta_x, &y, &stacking_config)?;

    let model = PipelineModel {
        taxonomy_name: taxonomy.name().to_string(),
        taxonomy_version: taxonomy.version().to_string(),
        seed: config.seed,
        svm,
        stacked,
        top_llm,
        sub_llm,
        config: config.clone(),
    };
    let report = TrainReport {
        corpus_rows: corpus.rows.len(),
        finetune_rows: finetune_examples.len(),
        eval_rows: eval_examples.len(),
        selection,
        fold_reports,
        mean_macro_f_beta,
        llm_stats,
    };
    Ok(TrainOutput { model, report, finetune_exports })
}
