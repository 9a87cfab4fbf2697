//! One-vs-rest RBF models over imputed, standardized features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::impute::{fit_imputer, impute, ImputationModel};
use super::kernel::{kernel_matrix, Kernel};
use super::platt::{fit_platt, PlattCalibrator};
use super::scale::{fit_scaler, scale, ScalingModel};
use super::smo::{solve_smo, SmoConfig};
use super::SvmError;
use crate::features::CategoricalEncoding;
use crate::matrix::DenseMatrix;
use crate::taxonomy::TagId;

/// One tag's fitted binary classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfSvmModel {
    pub support_vectors: DenseMatrix,
    /// alpha_i * y_i per support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub calibration: PlattCalibrator,
}

impl RbfSvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let kernel = Kernel::Rbf { gamma: self.gamma };
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coefficients)
            .map(|(sv, &coef)| coef * kernel.compute(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        self.calibration.probability(self.decision(x))
    }
}

/// A tag with a single class in training degenerates to its smoothed base
/// rate rather than a separating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TagModel {
    Svm(RbfSvmModel),
    ConstantPrior { probability: f64 },
}

impl TagModel {
    pub fn probability(&self, x: &[f64]) -> f64 {
        match self {
            TagModel::Svm(model) => model.probability(x),
            TagModel::ConstantPrior { probability } => *probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelSvmModel {
    /// Tag order is fixed at fit time and serialized with the model.
    pub tags: Vec<TagId>,
    pub models: Vec<TagModel>,
    pub imputer: ImputationModel,
    pub scaler: ScalingModel,
    pub encoding: CategoricalEncoding,
}

#[derive(Debug, Clone)]
pub struct MultiLabelFitConfig {
    /// (C, gamma) per tag, same order as the tag list.
    pub hyper: Vec<(f64, f64)>,
    pub impute_k: usize,
    pub tol: f64,
    pub calibration_folds: usize,
}

impl MultiLabelFitConfig {
    pub fn uniform(tags: usize, c: f64, gamma: f64) -> Self {
        MultiLabelFitConfig {
            hyper: vec![(c, gamma); tags],
            impute_k: 5,
            tol: 1e-3,
            calibration_folds: 3,
        }
    }
}

/// Round-robin stratified fold ids for calibration: the i-th positive (in row
/// order) goes to fold i % folds, likewise for negatives.
fn calibration_folds(labels: &[f64], folds: usize) -> Vec<usize> {
    let mut fold_of = vec![0usize; labels.len()];
    let mut pos_seen = 0usize;
    let mut neg_seen = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        if y > 0.0 {
            fold_of[i] = pos_seen % folds;
            pos_seen += 1;
        } else {
            fold_of[i] = neg_seen % folds;
            neg_seen += 1;
        }
    }
    fold_of
}

/// Full-data SMO fit plus a calibration sigmoid trained on out-of-fold
/// decision values (internal stratified folds; folds whose training part
/// degenerates to one class fall back to in-sample values).
pub(crate) fn solve_calibrated(
    gram: &DenseMatrix,
    labels: &[f64],
    config: &SmoConfig,
    folds: usize,
) -> Result<(super::smo::SmoSolution, PlattCalibrator), SvmError> {
    let n = labels.len();
    let full = solve_smo(gram, labels, config)?;

    let fold_of = calibration_folds(labels, folds.max(2));
    let mut oof_decisions = vec![0.0f64; n];
    for fold in 0..folds.max(2) {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        if held.is_empty() {
            continue;
        }
        let train_labels: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let both_classes =
            train_labels.iter().any(|&y| y > 0.0) && train_labels.iter().any(|&y| y < 0.0);
        if !both_classes {
            for &i in &held {
                oof_decisions[i] = full.decision(gram.row(i), labels);
            }
            continue;
        }
        let mut sub = DenseMatrix::zeros(train.len(), train.len());
        for (a, &i) in train.iter().enumerate() {
            for (b, &j) in train.iter().enumerate() {
                sub.set(a, b, gram.get(i, j));
            }
        }
        let solution = solve_smo(&sub, &train_labels, config)?;
        for &i in &held {
            let kernel_row: Vec<f64> = train.iter().map(|&j| gram.get(i, j)).collect();
            oof_decisions[i] = solution.decision(&kernel_row, &train_labels);
        }
    }
    Ok((full, fit_platt(&oof_decisions, labels)))
}

/// Smoothed base rate for degenerate tags.
pub(crate) fn constant_prior(positives: usize, n: usize) -> f64 {
    (positives as f64 + 1.0) / (n as f64 + 2.0)
}

#[allow(clippy::too_many_arguments)]
fn fit_tag(
    tag: &TagId,
    x: &DenseMatrix,
    gram: &DenseMatrix,
    positives: &[bool],
    c: f64,
    gamma: f64,
    tol: f64,
    folds: usize,
) -> Result<TagModel, SvmError> {
    let n = positives.len();
    let pos = positives.iter().filter(|&&p| p).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Ok(TagModel::ConstantPrior { probability: constant_prior(pos, n) });
    }
    let labels: Vec<f64> = positives.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let config = SmoConfig { c, tol, max_iter: 0 };

    let (full, calibration) =
        solve_calibrated(gram, &labels, &config, folds).map_err(|e| match e {
            SvmError::NoConvergence { iterations, .. } => {
                SvmError::NoConvergence { iterations, tag: Some(tag.to_string()) }
            }
            other => other,
        })?;

    let mut sv_rows = Vec::new();
    let mut duals = Vec::new();
    for (i, &alpha) in full.alphas.iter().enumerate() {
        if alpha > 1e-12 {
            sv_rows.push(x.row(i).to_vec());
            duals.push(alpha * labels[i]);
        }
    }
    Ok(TagModel::Svm(RbfSvmModel {
        support_vectors: DenseMatrix::from_rows(&sv_rows),
        dual_coefficients: duals,
        bias: full.bias,
        gamma,
        c,
        calibration,
    }))
}

/// Fits the preprocessing models and one calibrated classifier per tag.
/// `x_raw` may contain NaN sentinels; `y[t][i]` says whether row `i` carries
/// tag `t`.
pub fn fit_multilabel_svm(
    tags: Vec<TagId>,
    x_raw: &DenseMatrix,
    y: &[Vec<bool>],
    encoding: CategoricalEncoding,
    config: &MultiLabelFitConfig,
) -> Result<MultiLabelSvmModel, SvmError> {
    if x_raw.rows() == 0 {
        return Err(SvmError::EmptyMatrix);
    }
    if config.hyper.len() != tags.len() {
        return Err(SvmError::HyperArity { expected: tags.len(), found: config.hyper.len() });
    }
    for (tag, labels) in tags.iter().zip(y) {
        if labels.len() != x_raw.rows() {
            return Err(SvmError::LabelArity {
                tag: tag.to_string(),
                expected: x_raw.rows(),
                found: labels.len(),
            });
        }
    }

    let imputer = fit_imputer(x_raw, config.impute_k)?;
    let x_imputed = impute(&imputer, x_raw);
    let scaler = fit_scaler(&x_imputed)?;
    let x = scale(&scaler, &x_imputed)?;

    // One Gram matrix per distinct gamma, shared by the tags that use it.
    let mut grams: Vec<(u64, DenseMatrix)> = Vec::new();
    for &(_, gamma) in &config.hyper {
        let bits = gamma.to_bits();
        if !grams.iter().any(|(g, _)| *g == bits) {
            grams.push((bits, kernel_matrix(&x, Kernel::Rbf { gamma })));
        }
    }
    let gram_for = |gamma: f64| {
        let bits = gamma.to_bits();
        &grams.iter().find(|(g, _)| *g == bits).expect("gram precomputed").1
    };

    let models: Result<Vec<TagModel>, SvmError> = tags
        .par_iter()
        .zip(y.par_iter())
        .zip(config.hyper.par_iter())
        .map(|((tag, positives), &(c, gamma))| {
            fit_tag(tag, &x, gram_for(gamma), positives, c, gamma, config.tol, config.calibration_folds)
        })
        .collect();

    Ok(MultiLabelSvmModel { tags, models: models?, imputer, scaler, encoding })
}

/// Calibrated per-tag probabilities for raw feature rows (imputation and
/// scaling are applied internally with the stored models).
pub fn svm_predict_proba(
    model: &MultiLabelSvmModel,
    x_raw: &DenseMatrix,
) -> Result<DenseMatrix, SvmError> {
    if x_raw.cols() != model.imputer.training.cols() {
        return Err(SvmError::DimensionMismatch {
            expected: model.imputer.training.cols(),
            found: x_raw.cols(),
        });
    }
    let x = scale(&model.scaler, &impute(&model.imputer, x_raw))?;
    let mut out = DenseMatrix::zeros(x.rows(), model.tags.len());
    for row in 0..x.rows() {
        for (t, tag_model) in model.models.iter().enumerate() {
            out.set(row, t, tag_model.probability(x.row(row)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tag(s: &str) -> TagId {
        TagId::new(s).unwrap()
    }

    fn empty_encoding() -> CategoricalEncoding {
        CategoricalEncoding {
            countries: vec![],
            continents: vec![],
            traffic_tiers: vec![],
            geo_scopes: vec![],
        }
    }

    /// Blobs with both tags: tag a marks the first cluster, tag b the second.
    fn blob_problem(per_class: usize, seed: u64) -> (DenseMatrix, Vec<Vec<bool>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut a = Vec::new();
        for _ in 0..per_class {
            rows.push(vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]);
            a.push(true);
        }
        for _ in 0..per_class {
            rows.push(vec![rng.random_range(3.0..4.0), rng.random_range(3.0..4.0)]);
            a.push(false);
        }
        let b: Vec<bool> = a.iter().map(|&v| !v).collect();
        (DenseMatrix::from_rows(&rows), vec![a, b])
    }

    fn auc(scores: &[f64], positives: &[bool]) -> f64 {
        let mut pairs = 0usize;
        let mut wins = 0.0f64;
        for (i, &pi) in positives.iter().enumerate() {
            for (j, &pj) in positives.iter().enumerate() {
                if pi && !pj {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs as f64
    }

    #[test]
    fn separable_blobs_train_to_accuracy_one() {
        let (x, y) = blob_problem(40, 1);
        let config = MultiLabelFitConfig::uniform(2, 10.0, 0.5);
        let model =
            fit_multilabel_svm(vec![tag("a"), tag("b")], &x, &y, empty_encoding(), &config)
                .unwrap();
        let probs = svm_predict_proba(&model, &x).unwrap();
        for (row, (a, b)) in y[0].iter().zip(&y[1]).enumerate() {
            assert_eq!(probs.get(row, 0) > 0.5, *a, "tag a row {row}");
            assert_eq!(probs.get(row, 1) > 0.5, *b, "tag b row {row}");
        }
    }

    #[test]
    fn separable_test_set_reaches_auc_one() {
        let (x, y) = blob_problem(40, 2);
        let (x_test, y_test) = blob_problem(40, 3);
        let config = MultiLabelFitConfig::uniform(2, 10.0, 0.5);
        let model =
            fit_multilabel_svm(vec![tag("a"), tag("b")], &x, &y, empty_encoding(), &config)
                .unwrap();
        let probs = svm_predict_proba(&model, &x_test).unwrap();
        let scores: Vec<f64> = (0..x_test.rows()).map(|r| probs.get(r, 0)).collect();
        assert_eq!(auc(&scores, &y_test[0]), 1.0);
    }

    #[test]
    fn zero_positive_tag_becomes_constant_prior() {
        let (x, mut y) = blob_problem(10, 4);
        y[1] = vec![false; x.rows()];
        let config = MultiLabelFitConfig::uniform(2, 1.0, 0.5);
        let model =
            fit_multilabel_svm(vec![tag("a"), tag("b")], &x, &y, empty_encoding(), &config)
                .unwrap();
        match &model.models[1] {
            TagModel::ConstantPrior { probability } => {
                let expected = 1.0 / (x.rows() as f64 + 2.0);
                assert!((probability - expected).abs() < 1e-12);
            }
            other => panic!("expected constant prior, got {other:?}"),
        }
    }

    #[test]
    fn prediction_is_deterministic() {
        let (x, y) = blob_problem(20, 5);
        let config = MultiLabelFitConfig::uniform(2, 5.0, 1.0);
        let model =
            fit_multilabel_svm(vec![tag("a"), tag("b")], &x, &y, empty_encoding(), &config)
                .unwrap();
        let p1 = svm_predict_proba(&model, &x).unwrap();
        let p2 = svm_predict_proba(&model, &x).unwrap();
        assert_eq!(p1, p2);
        // And refitting gives the same model despite per-tag parallelism.
        let model2 =
            fit_multilabel_svm(vec![tag("a"), tag("b")], &x, &y, empty_encoding(), &config)
                .unwrap();
        assert_eq!(model, model2);
    }

    #[test]
    fn missing_values_are_imputed_before_fitting() {
        let (mut x, y) = blob_problem(15, 6);
        x.set(0, 1, f64::NAN);
        x.set(17, 0, f64::NAN);
        let config = MultiLabelFitConfig::uniform(2, 10.0, 0.5);
        let model =
            fit_multilabel_svm(vec![tag("a"), tag("b")], &x, &y, empty_encoding(), &config)
                .unwrap();
        let probs = svm_predict_proba(&model, &x).unwrap();
        for row in 0..x.rows() {
            assert!(probs.get(row, 0).is_finite());
        }
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let (x, y) = blob_problem(10, 7);
        let config = MultiLabelFitConfig::uniform(2, 1.0, 0.5);
        let model =
            fit_multilabel_svm(vec![tag("a"), tag("b")], &x, &y, empty_encoding(), &config)
                .unwrap();
        let wrong = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(
            svm_predict_proba(&model, &wrong),
            Err(SvmError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn impute_then_scale_preserves_observed_ordering() {
        use crate::svm::{fit_imputer, fit_scaler, impute, scale};
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..25)
                .map(|_| {
                    (0..4)
                        .map(|_| {
                            if rng.random_bool(0.15) {
                                f64::NAN
                            } else {
                                rng.random_range(-100.0..100.0)
                            }
                        })
                        .collect()
                })
                .collect();
            let x = DenseMatrix::from_rows(&rows);
            let filled = impute(&fit_imputer(&x, 4).unwrap(), &x);
            let scaler = fit_scaler(&filled).unwrap();
            let scaled = scale(&scaler, &filled).unwrap();
            for col in 0..x.cols() {
                if scaler.constant[col] {
                    continue;
                }
                let observed: Vec<usize> =
                    (0..x.rows()).filter(|&r| !x.get(r, col).is_nan()).collect();
                for pair in observed.windows(2) {
                    let (a, b) = (pair[0], pair[1]);
                    let before = x.get(a, col).partial_cmp(&x.get(b, col)).unwrap();
                    let after = scaled.get(a, col).partial_cmp(&scaled.get(b, col)).unwrap();
                    assert_eq!(before, after, "ordering changed in column {col}");
                }
            }
        }
    }

    #[test]
    fn hyper_arity_is_checked() {
        let (x, y) = blob_problem(5, 8);
        let mut config = MultiLabelFitConfig::uniform(2, 1.0, 0.5);
        config.hyper.pop();
        assert!(matches!(
            fit_multilabel_svm(vec![tag("a"), tag("b")], &x, &y, empty_encoding(), &config),
            Err(SvmError::HyperArity { .. })
        ));
    }
}
