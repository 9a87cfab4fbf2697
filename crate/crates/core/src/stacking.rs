//! Per-tag linear meta-classifiers fusing the language-model confidences with
//! the structured-model probabilities into the final top-level decision.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::DenseMatrix;
use crate::svm::multilabel::{constant_prior, solve_calibrated};
use crate::svm::{kernel_matrix, Kernel, PlattCalibrator, SmoConfig, SvmError};
use crate::taxonomy::{TagId, TagSet};

#[derive(Debug, Error)]
pub enum StackingError {
    #[error("tag {0} is not a top-level tag of the model")]
    UnknownTag(TagId),
    #[error("meta-feature vector has length {found}, model expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label vector for tag {tag} has {found} rows, expected {expected}")]
    LabelArity { tag: String, expected: usize, found: usize },
    #[error("no training rows")]
    Empty,
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// Concatenation of the per-tag language-model confidences and the per-tag
/// structured-model probabilities, in top-tag order. Absent entries are 0.
pub fn build_meta_features(
    top_tags: &[TagId],
    llm: &BTreeMap<TagId, f64>,
    svm_probs: &BTreeMap<TagId, f64>,
) -> Result<Vec<f64>, StackingError> {
    for key in llm.keys().chain(svm_probs.keys()) {
        if !top_tags.contains(key) {
            return Err(StackingError::UnknownTag(key.clone()));
        }
    }
    let mut values = Vec::with_capacity(2 * top_tags.len());
    for tag in top_tags {
        values.push(llm.get(tag).copied().unwrap_or(0.0));
    }
    for tag in top_tags {
        values.push(svm_probs.get(tag).copied().unwrap_or(0.0));
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTagModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub calibration: PlattCalibrator,
}

impl LinearTagModel {
    fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    fn probability(&self, x: &[f64]) -> f64 {
        self.calibration.probability(self.decision(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MetaTagModel {
    Linear(LinearTagModel),
    ConstantPrior { probability: f64 },
}

impl MetaTagModel {
    pub fn probability(&self, x: &[f64]) -> f64 {
        match self {
            MetaTagModel::Linear(model) => model.probability(x),
            MetaTagModel::ConstantPrior { probability } => *probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub tags: Vec<TagId>,
    pub models: Vec<MetaTagModel>,
    pub feature_len: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StackingFitConfig {
    pub c: f64,
    pub tol: f64,
    pub calibration_folds: usize,
    pub threshold: f64,
}

impl Default for StackingFitConfig {
    fn default() -> Self {
        StackingFitConfig { c: 1.0, tol: 1e-3, calibration_folds: 3, threshold: 0.5 }
    }
}

/// Fits one calibrated linear model per top-level tag on meta features that
/// must come from out-of-fold base-model outputs (the trainer guarantees
/// that; nothing here can detect leakage).
pub fn fit_stacking(
    tags: Vec<TagId>,
    meta_x: &DenseMatrix,
    y: &[Vec<bool>],
    config: &StackingFitConfig,
) -> Result<StackedModel, StackingError> {
    let n = meta_x.rows();
    if n == 0 {
        return Err(StackingError::Empty);
    }
    for (tag, labels) in tags.iter().zip(y) {
        if labels.len() != n {
            return Err(StackingError::LabelArity {
                tag: tag.to_string(),
                expected: n,
                found: labels.len(),
            });
        }
    }

    // Degenerate design matrix (every row identical) carries no signal; fall
    // straight to base rates.
    let first = meta_x.row(0).to_vec();
    let degenerate = meta_x.iter_rows().all(|row| row == first.as_slice());

    let gram = if degenerate { None } else { Some(kernel_matrix(meta_x, Kernel::Linear)) };

    let models: Result<Vec<MetaTagModel>, StackingError> = tags
        .par_iter()
        .zip(y.par_iter())
        .map(|(tag, positives)| {
            let pos = positives.iter().filter(|&&p| p).count();
            let neg = n - pos;
            let Some(gram) = &gram else {
                return Ok(MetaTagModel::ConstantPrior { probability: constant_prior(pos, n) });
            };
            if pos == 0 || neg == 0 {
                return Ok(MetaTagModel::ConstantPrior { probability: constant_prior(pos, n) });
            }
            let labels: Vec<f64> =
                positives.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
            let smo = SmoConfig { c: config.c, tol: config.tol, max_iter: 0 };
            let (solution, calibration) =
                solve_calibrated(gram, &labels, &smo, config.calibration_folds).map_err(
                    |e| match e {
                        SvmError::NoConvergence { iterations, .. } => {
                            SvmError::NoConvergence { iterations, tag: Some(tag.to_string()) }
                        }
                        other => other,
                    },
                )?;
            // Collapse the dual solution to primal weights.
            let mut weights = vec![0.0f64; meta_x.cols()];
            for (i, &alpha) in solution.alphas.iter().enumerate() {
                if alpha > 0.0 {
                    let coefficient = alpha * labels[i];
                    for (w, v) in weights.iter_mut().zip(meta_x.row(i)) {
                        *w += coefficient * v;
                    }
                }
            }
            Ok(MetaTagModel::Linear(LinearTagModel {
                weights,
                bias: solution.bias,
                calibration,
            }))
        })
        .collect();

    Ok(StackedModel {
        tags,
        models: models?,
        feature_len: meta_x.cols(),
        threshold: config.threshold,
    })
}

/// Final decision for one AS: a tag is included iff its calibrated probability
/// reaches the threshold. Returns the tag set plus the full probability map.
pub fn stacked_predict(
    model: &StackedModel,
    meta: &[f64],
) -> Result<(TagSet, BTreeMap<TagId, f64>), StackingError> {
    if meta.len() != model.feature_len {
        return Err(StackingError::LengthMismatch {
            expected: model.feature_len,
            found: meta.len(),
        });
    }
    let mut tags = TagSet::new();
    let mut probabilities = BTreeMap::new();
    for (tag, tag_model) in model.tags.iter().zip(&model.models) {
        let p = tag_model.probability(meta);
        probabilities.insert(tag.clone(), p);
        if p >= model.threshold {
            tags.insert(tag.clone());
        }
    }
    Ok((tags, probabilities))
}
