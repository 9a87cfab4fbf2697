//! Iterative stratification for multi-label datasets.
//!
//! Examples are assigned label by label, rarest label first, so that each
//! fold's share of every label tracks the fold's target proportion. Ties are
//! broken by the fold's remaining demand for the label, then by remaining
//! total capacity, then by a seeded draw, which makes each split a pure
//! function of `(examples, proportions, seed)`.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, LabeledExample};
use crate::taxonomy::TagId;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub proportions: Vec<f64>,
    /// asn -> fold index.
    pub assignment: BTreeMap<u32, usize>,
}

impl FoldAssignment {
    pub fn fold_members(&self, fold: usize) -> Vec<u32> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(&asn, _)| asn)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_folds];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// (train, test) asn lists for using the folds as CV splits: split `i`
    /// holds out fold `i`.
    pub fn cv_splits(&self) -> Vec<(Vec<u32>, Vec<u32>)> {
        (0..self.n_folds)
            .map(|i| {
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (&asn, &f) in &self.assignment {
                    if f == i {
                        test.push(asn);
                    } else {
                        train.push(asn);
                    }
                }
                (train, test)
            })
            .collect()
    }
}

pub fn iterative_stratified_split(
    examples: &[LabeledExample],
    proportions: &[f64],
    seed: u64,
) -> Result<FoldAssignment, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyExamples);
    }
    if proportions.len() < 2 {
        return Err(EvalError::DegenerateProportions(format!(
            "need at least 2 folds, got {}",
            proportions.len()
        )));
    }
    if proportions.iter().any(|&p| p <= 0.0) {
        return Err(EvalError::DegenerateProportions("non-positive proportion".into()));
    }
    let total: f64 = proportions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(EvalError::DegenerateProportions(format!("proportions sum to {total}")));
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for ex in examples {
            if !seen.insert(ex.asn) {
                return Err(EvalError::DuplicateAsn(ex.asn));
            }
        }
    }

    let n_folds = proportions.len();
    let n = examples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Remaining per-fold demand for each label and overall capacity.
    let mut label_counts: BTreeMap<&TagId, usize> = BTreeMap::new();
    for ex in examples {
        for tag in ex.tags.iter() {
            *label_counts.entry(tag).or_insert(0) += 1;
        }
    }
    let mut demand: BTreeMap<&TagId, Vec<f64>> = label_counts
        .iter()
        .map(|(&tag, &count)| {
            (tag, proportions.iter().map(|p| count as f64 * p).collect())
        })
        .collect();
    let mut capacity: Vec<f64> = proportions.iter().map(|p| n as f64 * p).collect();

    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut remaining_per_label: BTreeMap<&TagId, usize> = label_counts.clone();

    const TIE: f64 = 1e-9;
    let pick_max = |values: &[f64], among: &[usize], rng: &mut ChaCha8Rng| -> usize {
        let best = among.iter().map(|&f| values[f]).fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = among.iter().copied().filter(|&f| values[f] >= best - TIE).collect();
        if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.random_range(0..tied.len())]
        }
    };

    // Rarest label that still has unassigned examples first; ties break toward
    // the lexicographically smallest id so the pass order is stable.
    while let Some((&label, _)) = remaining_per_label
        .iter()
        .filter(|(_, &c)| c > 0)
        .min_by_key(|(tag, &c)| (c, *tag))
    {
        for (i, ex) in examples.iter().enumerate() {
            if assigned[i].is_some() || !ex.tags.contains(label) {
                continue;
            }
            let all: Vec<usize> = (0..n_folds).collect();
            let label_demand = &demand[&label];
            let best = label_demand.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let tied: Vec<usize> =
                all.iter().copied().filter(|&f| label_demand[f] >= best - TIE).collect();
            let fold =
                if tied.len() == 1 { tied[0] } else { pick_max(&capacity, &tied, &mut rng) };

            assigned[i] = Some(fold);
            capacity[fold] -= 1.0;
            for tag in ex.tags.iter() {
                if let Some(d) = demand.get_mut(tag) {
                    d[fold] -= 1.0;
                }
                if let Some(c) = remaining_per_label.get_mut(tag) {
                    *c -= 1;
                }
            }
        }
    }

    // Unlabeled examples go to the fold with the most remaining capacity.
    for (i, ex) in examples.iter().enumerate() {
        if assigned[i].is_none() {
            debug_assert!(ex.tags.is_empty());
            let all: Vec<usize> = (0..n_folds).collect();
            let fold = pick_max(&capacity, &all, &mut rng);
            assigned[i] = Some(fold);
            capacity[fold] -= 1.0;
        }
    }

    let assignment: BTreeMap<u32, usize> = examples
        .iter()
        .zip(&assigned)
        .map(|(ex, f)| (ex.asn, f.expect("every example assigned")))
        .collect();
    Ok(FoldAssignment { n_folds, proportions: proportions.to_vec(), assignment })
}

/// `k` equal-proportion folds via iterative stratification.
pub fn kfold_iterative(
    examples: &[LabeledExample],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::TooFewFolds(k));
    }
    if k > examples.len() {
        return Err(EvalError::FoldTooLarge { k, n: examples.len() });
    }
    let proportions = vec![1.0 / k as f64; k];
    let assignment = iterative_stratified_split(examples, &proportions, seed)?;
    for (i, size) in assignment.fold_sizes().iter().enumerate() {
        if *size == 0 {
            return Err(EvalError::EmptyFold(i));
        }
    }
    Ok(assignment)
}

/// Plain seeded shuffle split, for comparing against the stratified one.
pub fn random_split(
    examples: &[LabeledExample],
    proportions: &[f64],
    seed: u64,
) -> Result<FoldAssignment, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyExamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let n = examples.len() as f64;
    let mut assignment = BTreeMap::new();
    let mut start = 0usize;
    let mut boundary = 0.0;
    for (fold, &p) in proportions.iter().enumerate() {
        boundary += p * n;
        let end = if fold + 1 == proportions.len() { examples.len() } else { boundary.round() as usize };
        for &i in &order[start..end.min(examples.len())] {
            assignment.insert(examples[i].asn, fold);
        }
        start = end.min(examples.len());
    }
    Ok(FoldAssignment { n_folds: proportions.len(), proportions: proportions.to_vec(), assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::TagSet;

    fn tag(s: &str) -> TagId {
        TagId::new(s).unwrap()
    }

    fn examples_with_counts(counts: &[(&str, usize)]) -> Vec<LabeledExample> {
        let mut out = Vec::new();
        let mut asn = 1u32;
        for &(label, count) in counts {
            for _ in 0..count {
                out.push(LabeledExample {
                    asn,
                    tags: [tag(label)].into_iter().collect(),
                });
                asn += 1;
            }
        }
        out
    }

    fn label_fold_count(
        examples: &[LabeledExample],
        fa: &FoldAssignment,
        label: &TagId,
        fold: usize,
    ) -> usize {
        examples
            .iter()
            .filter(|ex| ex.tags.contains(label) && fa.assignment[&ex.asn] == fold)
            .count()
    }

    #[test]
    fn transit_subclass_split_lands_in_band() {
        let examples =
            examples_with_counts(&[("domestic", 24), ("global", 42), ("regional", 10)]);
        let fa = iterative_stratified_split(&examples, &[0.7, 0.3], 7).unwrap();
        for (label, count) in [("domestic", 24usize), ("global", 42), ("regional", 10)] {
            let val = label_fold_count(&examples, &fa, &tag(label), 1);
            let frac = val as f64 / count as f64;
            assert!((0.25..=0.35).contains(&frac), "{label}: {frac}");
        }
    }

    #[test]
    fn single_label_dataset_reduces_to_stratified_split() {
        let examples = examples_with_counts(&[("a", 30), ("b", 60), ("c", 12)]);
        let fa = iterative_stratified_split(&examples, &[0.5, 0.5], 1).unwrap();
        for (label, count) in [("a", 30usize), ("b", 60), ("c", 12)] {
            for fold in 0..2 {
                let got = label_fold_count(&examples, &fa, &tag(label), fold) as f64;
                let want = count as f64 * 0.5;
                assert!((got - want).abs() <= 1.0, "{label} fold {fold}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn unique_label_combinations_balance_fold_sizes() {
        let examples: Vec<LabeledExample> = (0..80)
            .map(|i| LabeledExample {
                asn: i + 1,
                tags: [tag(&format!("unique{i:02}"))].into_iter().collect(),
            })
            .collect();
        let fa = iterative_stratified_split(&examples, &[0.5, 0.5], 3).unwrap();
        assert_eq!(fa.fold_sizes(), vec![40, 40]);
    }

    #[test]
    fn kfold_sizes_are_balanced() {
        let examples = examples_with_counts(&[("a", 45), ("b", 45)]);
        let fa = kfold_iterative(&examples, 3, 5).unwrap();
        for size in fa.fold_sizes() {
            assert!((29..=31).contains(&size), "{size}");
        }
    }

    #[test]
    fn leave_one_out_degenerate_case() {
        let examples = examples_with_counts(&[("a", 5)]);
        let fa = kfold_iterative(&examples, 5, 0).unwrap();
        assert_eq!(fa.fold_sizes(), vec![1, 1, 1, 1, 1]);
    }

    #[test]
    fn same_seed_reproduces_assignment() {
        let examples = examples_with_counts(&[("a", 20), ("b", 13), ("c", 7)]);
        let a = iterative_stratified_split(&examples, &[0.7, 0.3], 99).unwrap();
        let b = iterative_stratified_split(&examples, &[0.7, 0.3], 99).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn degenerate_proportions_rejected() {
        let examples = examples_with_counts(&[("a", 4)]);
        assert!(matches!(
            iterative_stratified_split(&examples, &[0.7, 0.4], 0),
            Err(EvalError::DegenerateProportions(_))
        ));
        assert!(matches!(
            iterative_stratified_split(&examples, &[1.0], 0),
            Err(EvalError::DegenerateProportions(_))
        ));
        assert!(matches!(
            iterative_stratified_split(&examples, &[0.5, -0.5, 1.0], 0),
            Err(EvalError::DegenerateProportions(_))
        ));
    }

    #[test]
    fn k_larger_than_dataset_rejected() {
        let examples = examples_with_counts(&[("a", 2)]);
        assert!(matches!(
            kfold_iterative(&examples, 3, 0),
            Err(EvalError::FoldTooLarge { .. })
        ));
    }

    #[test]
    fn empty_tag_sets_are_assigned() {
        let mut examples = examples_with_counts(&[("a", 6)]);
        examples.push(LabeledExample { asn: 100, tags: TagSet::new() });
        examples.push(LabeledExample { asn: 101, tags: TagSet::new() });
        let fa = iterative_stratified_split(&examples, &[0.5, 0.5], 0).unwrap();
        assert_eq!(fa.assignment.len(), 8);
        assert_eq!(fa.fold_sizes().iter().sum::<usize>(), 8);
    }

    #[test]
    fn multi_label_examples_assigned_once() {
        let examples: Vec<LabeledExample> = (0..30)
            .map(|i| {
                let mut tags: TagSet = [tag("common")].into_iter().collect();
                if i % 3 == 0 {
                    tags.insert(tag("rare"));
                }
                LabeledExample { asn: i + 1, tags }
            })
            .collect();
        let fa = iterative_stratified_split(&examples, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 11).unwrap();
        assert_eq!(fa.assignment.len(), 30);
        // The rare label (10 examples) lands close to uniform.
        for fold in 0..3 {
            let c = label_fold_count(&examples, &fa, &tag("rare"), fold);
            assert!((2..=5).contains(&c), "fold {fold}: {c}");
        }
    }

    /// Stratification quality versus a plain random split on random
    /// multi-label datasets.
    #[test]
    fn stratified_beats_random_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n_folds = 3;
        let proportions = vec![1.0 / 3.0; 3];
        let mut strat_bad = 0usize;
        let mut random_bad = 0usize;
        let datasets = 1000;
        for _ in 0..datasets {
            let n = rng.random_range(60..=600);
            let n_labels = rng.random_range(5..=18);
            let labels: Vec<TagId> = (0..n_labels).map(|i| tag(&format!("l{i:02}"))).collect();
            let weights: Vec<f64> = (0..n_labels).map(|_| rng.random_range(0.02..0.5)).collect();
            let examples: Vec<LabeledExample> = (0..n)
                .map(|i| LabeledExample {
                    asn: i as u32 + 1,
                    tags: labels
                        .iter()
                        .zip(&weights)
                        .filter(|(_, &w)| rng.random_bool(w))
                        .map(|(l, _)| l.clone())
                        .collect(),
                })
                .collect();
            let seed = rng.random::<u64>();
            let strat = iterative_stratified_split(&examples, &proportions, seed).unwrap();
            let rand_split = random_split(&examples, &proportions, seed).unwrap();

            let violates = |fa: &FoldAssignment| -> bool {
                for label in &labels {
                    let total =
                        examples.iter().filter(|e| e.tags.contains(label)).count();
                    if total < 20 {
                        continue;
                    }
                    for fold in 0..n_folds {
                        let c = label_fold_count(&examples, fa, label, fold);
                        let share = c as f64 / total as f64;
                        if (share - 1.0 / 3.0).abs() > 0.10 {
                            return true;
                        }
                    }
                }
                false
            };
            if violates(&strat) {
                strat_bad += 1;
            }
            if violates(&rand_split) {
                random_bad += 1;
            }
        }
        assert!(
            strat_bad <= datasets / 20,
            "stratified split out of band on {strat_bad}/{datasets} datasets"
        );
        assert!(
            random_bad > strat_bad,
            "random split should violate more often ({random_bad} vs {strat_bad})"
        );
    }
}
