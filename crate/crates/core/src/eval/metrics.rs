//! Per-tag and aggregate multi-label metrics.
//!
//! Zero-division conventions, surfaced explicitly in the report so the tables
//! stay interpretable:
//!
//! - a tag with zero predicted positives gets precision 0 and is flagged;
//! - a tag with zero actual positives has undefined recall, is excluded from
//!   macro recall / macro F1, and is listed under `unsupported`;
//! - a tag absent from both predictions and truth is excluded from every macro
//!   average (it still contributes a per-label accuracy of 1).

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::taxonomy::{TagId, TagSet};

/// F_beta as the weighted harmonic mean of precision and recall.
/// Returns 0 when the denominator vanishes.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TagMetrics {
    pub tag: TagId,
    pub precision: f64,
    /// `None` when the tag has no actual positives.
    pub recall: Option<f64>,
    pub accuracy: f64,
    pub support: usize,
    pub predicted: usize,
    pub true_positives: usize,
    /// Set when precision fell back to 0 because nothing was predicted.
    pub zero_predicted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_tag: Vec<TagMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub avg_per_label_accuracy: f64,
    pub subset_accuracy: f64,
    /// Tags with zero actual positives, excluded from macro recall and F1.
    pub unsupported: Vec<TagId>,
    pub samples: usize,
}

impl MetricsReport {
    /// Unweighted mean of per-tag F_beta over supported tags.
    pub fn macro_f_beta(&self, beta: f64) -> f64 {
        let scores: Vec<f64> = self
            .per_tag
            .iter()
            .filter(|t| t.support > 0)
            .map(|t| f_beta(t.precision, t.recall.unwrap_or(0.0), beta))
            .collect();
        mean(&scores)
    }

    /// Plain-text table: one row per tag, aggregate footer.
    pub fn render_text(&self) -> String {
        let width = self
            .per_tag
            .iter()
            .map(|t| t.tag.as_str().len())
            .max()
            .unwrap_or(4)
            .max(4);
        let mut out = String::new();
        out.push_str(&format!("{:<width$}  {:>6}  {:>6}  {:>6}  {:>8}\n", "tag", "prec", "rec", "acc", "support"));
        for t in &self.per_tag {
            let rec = t.recall.map_or("-".to_string(), |r| format!("{r:.3}"));
            out.push_str(&format!(
                "{:<width$}  {:>6.3}  {:>6}  {:>6.3}  {:>8}\n",
                t.tag.as_str(),
                t.precision,
                rec,
                t.accuracy,
                t.support
            ));
        }
        out.push_str(&format!(
            "macro precision {:.4}  macro recall {:.4}  macro f1 {:.4}\n",
            self.macro_precision, self.macro_recall, self.macro_f1
        ));
        out.push_str(&format!(
            "avg per-label accuracy {:.4}  subset accuracy {:.4}  samples {}\n",
            self.avg_per_label_accuracy, self.subset_accuracy, self.samples
        ));
        if !self.unsupported.is_empty() {
            let list: Vec<&str> = self.unsupported.iter().map(TagId::as_str).collect();
            out.push_str(&format!("unsupported tags (excluded from macro recall): {}\n", list.join(", ")));
        }
        out
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Per-tag binary precision/recall/accuracy plus the macro aggregates,
/// average per-label accuracy and subset accuracy.
pub fn compute_metrics(
    predictions: &[TagSet],
    truth: &[TagSet],
    universe: &[TagId],
) -> Result<MetricsReport, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    let n = predictions.len();
    if n == 0 {
        return Err(EvalError::NoSamples);
    }
    for set in predictions.iter().chain(truth.iter()) {
        for tag in set.iter() {
            if !universe.contains(tag) {
                return Err(EvalError::TagOutsideUniverse(tag.clone()));
            }
        }
    }

    let mut per_tag = Vec::with_capacity(universe.len());
    let mut unsupported = Vec::new();
    for tag in universe {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (pred, gold) in predictions.iter().zip(truth) {
            match (pred.contains(tag), gold.contains(tag)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let support = tp + fn_;
        let predicted = tp + fp;
        let zero_predicted = predicted == 0;
        let precision = if zero_predicted { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if support == 0 {
            unsupported.push(tag.clone());
            None
        } else {
            Some(tp as f64 / support as f64)
        };
        let accuracy = (n - fp - fn_) as f64 / n as f64;
        per_tag.push(TagMetrics {
            tag: tag.clone(),
            precision,
            recall,
            accuracy,
            support,
            predicted,
            true_positives: tp,
            zero_predicted,
        });
    }

    let active: Vec<&TagMetrics> =
        per_tag.iter().filter(|t| t.support > 0 || t.predicted > 0).collect();
    let macro_precision = mean(&active.iter().map(|t| t.precision).collect::<Vec<_>>());
    let supported: Vec<&TagMetrics> = per_tag.iter().filter(|t| t.support > 0).collect();
    let macro_recall = mean(&supported.iter().map(|t| t.recall.unwrap_or(0.0)).collect::<Vec<_>>());
    let macro_f1 = mean(
        &supported
            .iter()
            .map(|t| f_beta(t.precision, t.recall.unwrap_or(0.0), 1.0))
            .collect::<Vec<_>>(),
    );
    let avg_per_label_accuracy = mean(&per_tag.iter().map(|t| t.accuracy).collect::<Vec<_>>());
    let exact = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();

    Ok(MetricsReport {
        per_tag,
        macro_precision,
        macro_recall,
        macro_f1,
        avg_per_label_accuracy,
        subset_accuracy: exact as f64 / n as f64,
        unsupported,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tag(s: &str) -> TagId {
        TagId::new(s).unwrap()
    }

    fn set(ids: &[&str]) -> TagSet {
        ids.iter().map(|s| tag(s)).collect()
    }

    /// Independent reference: recomputes every figure from scratch with naive
    /// per-(sample, tag) membership checks.
    pub(crate) fn oracle(predictions: &[TagSet], truth: &[TagSet], universe: &[TagId]) -> MetricsReport {
        let n = predictions.len();
        let mut per_tag = Vec::new();
        let mut unsupported = Vec::new();
        for tag in universe {
            let tp = (0..n)
                .filter(|&i| predictions[i].contains(tag) && truth[i].contains(tag))
                .count();
            let predicted = (0..n).filter(|&i| predictions[i].contains(tag)).count();
            let support = (0..n).filter(|&i| truth[i].contains(tag)).count();
            let agree = (0..n)
                .filter(|&i| predictions[i].contains(tag) == truth[i].contains(tag))
                .count();
            if support == 0 {
                unsupported.push(tag.clone());
            }
            per_tag.push(TagMetrics {
                tag: tag.clone(),
                precision: if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 },
                recall: (support > 0).then(|| tp as f64 / support as f64),
                accuracy: agree as f64 / n as f64,
                support,
                predicted,
                true_positives: tp,
                zero_predicted: predicted == 0,
            });
        }
        let collect_mean = |values: Vec<f64>| {
            if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 }
        };
        let macro_precision = collect_mean(
            per_tag
                .iter()
                .filter(|t| t.support > 0 || t.predicted > 0)
                .map(|t| t.precision)
                .collect(),
        );
        let macro_recall = collect_mean(
            per_tag.iter().filter(|t| t.support > 0).map(|t| t.recall.unwrap()).collect(),
        );
        let macro_f1 = collect_mean(
            per_tag
                .iter()
                .filter(|t| t.support > 0)
                .map(|t| {
                    let p = t.precision;
                    let r = t.recall.unwrap();
                    if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) }
                })
                .collect(),
        );
        let avg = collect_mean(per_tag.iter().map(|t| t.accuracy).collect());
        let exact = (0..n).filter(|&i| predictions[i] == truth[i]).count();
        MetricsReport {
            per_tag,
            macro_precision,
            macro_recall,
            macro_f1,
            avg_per_label_accuracy: avg,
            subset_accuracy: exact as f64 / n as f64,
            unsupported,
            samples: n,
        }
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng, n_tags: usize, max_n: usize) -> (Vec<TagSet>, Vec<TagSet>, Vec<TagId>) {
        let universe: Vec<TagId> = (0..n_tags).map(|i| tag(&format!("t{i:02}"))).collect();
        let n = rng.random_range(1..=max_n);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<TagSet> {
            (0..n)
                .map(|_| {
                    universe
                        .iter()
                        .filter(|_| rng.random_bool(0.15))
                        .cloned()
                        .collect()
                })
                .collect()
        };
        let truth = draw(rng);
        let predictions = draw(rng);
        (predictions, truth, universe)
    }

    pub(crate) fn assert_reports_match(a: &MetricsReport, b: &MetricsReport, tol: f64) {
        assert_eq!(a.per_tag.len(), b.per_tag.len());
        for (x, y) in a.per_tag.iter().zip(&b.per_tag) {
            assert_eq!(x.tag, y.tag);
            assert!((x.precision - y.precision).abs() <= tol, "precision {}", x.tag);
            match (x.recall, y.recall) {
                (None, None) => {}
                (Some(rx), Some(ry)) => assert!((rx - ry).abs() <= tol, "recall {}", x.tag),
                _ => panic!("recall definedness differs for {}", x.tag),
            }
            assert!((x.accuracy - y.accuracy).abs() <= tol, "accuracy {}", x.tag);
        }
        assert!((a.macro_precision - b.macro_precision).abs() <= tol);
        assert!((a.macro_recall - b.macro_recall).abs() <= tol);
        assert!((a.macro_f1 - b.macro_f1).abs() <= tol);
        assert!((a.avg_per_label_accuracy - b.avg_per_label_accuracy).abs() <= tol);
        assert!((a.subset_accuracy - b.subset_accuracy).abs() <= tol);
        assert_eq!(a.unsupported, b.unsupported);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let truth = vec![set(&["a"]), set(&["b"]), set(&["a", "b"])];
        let universe = vec![tag("a"), tag("b"), tag("c")];
        let report = compute_metrics(&truth, &truth, &universe).unwrap();
        assert_eq!(report.macro_precision, 1.0);
        assert_eq!(report.macro_recall, 1.0);
        assert_eq!(report.macro_f1, 1.0);
        assert_eq!(report.avg_per_label_accuracy, 1.0);
        assert_eq!(report.subset_accuracy, 1.0);
        assert_eq!(report.unsupported, vec![tag("c")]);
    }

    #[test]
    fn worked_three_sample_example() {
        let truth = vec![set(&["a"]), set(&["b"]), set(&["a", "b"])];
        let pred = vec![set(&["a"]), set(&["a"]), set(&["a", "b"])];
        let universe = vec![tag("a"), tag("b")];
        let report = compute_metrics(&pred, &truth, &universe).unwrap();
        assert!((report.subset_accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert!((report.per_tag[0].precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(report.per_tag[0].recall, Some(1.0));
        assert_eq!(report.per_tag[1].precision, 1.0);
        assert_eq!(report.per_tag[1].recall, Some(0.5));
        assert!((report.macro_precision - 5.0 / 6.0).abs() < 1e-15);
        assert!((report.macro_recall - 3.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn empty_predictions_zero_recall_and_subset() {
        let truth = vec![set(&["a"]), set(&["a", "b"])];
        let pred = vec![TagSet::new(), TagSet::new()];
        let universe = vec![tag("a"), tag("b")];
        let report = compute_metrics(&pred, &truth, &universe).unwrap();
        assert_eq!(report.macro_recall, 0.0);
        assert_eq!(report.subset_accuracy, 0.0);
        assert!(report.per_tag.iter().all(|t| t.zero_predicted));
    }

    #[test]
    fn matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let (pred, truth, universe) = random_instance(&mut rng, 18, 100);
            let fast = compute_metrics(&pred, &truth, &universe).unwrap();
            let slow = oracle(&pred, &truth, &universe);
            assert_reports_match(&fast, &slow, 1e-12);
        }
    }

    #[test]
    fn shuffling_pairs_leaves_metrics_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (pred, truth, universe) = random_instance(&mut rng, 8, 60);
        let base = compute_metrics(&pred, &truth, &universe).unwrap();
        let mut order: Vec<usize> = (0..pred.len()).collect();
        order.shuffle(&mut rng);
        let pred2: Vec<TagSet> = order.iter().map(|&i| pred[i].clone()).collect();
        let truth2: Vec<TagSet> = order.iter().map(|&i| truth[i].clone()).collect();
        let shuffled = compute_metrics(&pred2, &truth2, &universe).unwrap();
        assert_reports_match(&base, &shuffled, 0.0);
    }

    #[test]
    fn f_beta_values() {
        assert_eq!(f_beta(1.0, 1.0, 0.5), 1.0);
        assert!((f_beta(0.8, 0.6, 0.5) - 0.75).abs() < 1e-15);
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn f_beta_one_is_harmonic_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p: f64 = rng.random();
            let r: f64 = rng.random();
            let harmonic = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            assert!((f_beta(p, r, 1.0) - harmonic).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let err = compute_metrics(&[TagSet::new()], &[], &[]).unwrap_err();
        assert!(matches!(err, EvalError::LengthMismatch { .. }));
    }

    #[test]
    fn out_of_universe_tag_is_an_error() {
        let err = compute_metrics(&[set(&["a"])], &[set(&["a"])], &[]).unwrap_err();
        assert!(matches!(err, EvalError::TagOutsideUniverse(_)));
    }

    #[test]
    fn text_table_has_a_row_per_tag() {
        let truth = vec![set(&["a"]), set(&["b"])];
        let universe = vec![tag("a"), tag("b")];
        let report = compute_metrics(&truth, &truth, &universe).unwrap();
        let text = report.render_text();
        assert!(text.contains("a  "), "{text}");
        assert!(text.contains("macro precision"), "{text}");
        assert!(text.contains("subset accuracy"), "{text}");
    }
}
