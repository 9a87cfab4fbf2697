//! Nested cross-validated hyperparameter selection.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::stratify::kfold_iterative;
use super::{EvalError, LabeledExample};

/// One candidate of the (C, gamma) search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub c: f64,
    pub gamma: f64,
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C={} gamma={}", self.c, self.gamma)
    }
}

/// Cartesian grid sorted by (C, gamma) ascending, so that the selector's
/// first-wins tie rule resolves toward smaller C, then smaller gamma.
pub fn hyper_grid(cs: &[f64], gammas: &[f64]) -> Vec<HyperParams> {
    let mut grid: Vec<HyperParams> = cs
        .iter()
        .flat_map(|&c| gammas.iter().map(move |&gamma| HyperParams { c, gamma }))
        .collect();
    grid.sort_by(|a, b| (a.c, a.gamma).partial_cmp(&(b.c, b.gamma)).unwrap());
    grid
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateScore<C> {
    pub candidate: C,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSelectionReport<C> {
    pub beta: f64,
    pub inner_folds: usize,
    pub candidates: Vec<CandidateScore<C>>,
    pub best_index: usize,
}

/// Scores each candidate with inner k-fold CV and returns the argmax of the
/// mean score (the caller's `evaluate` typically reports macro F_beta on the
/// held-out fold). Ties keep the earliest candidate, so pass the grid in
/// preference order (see [`hyper_grid`]).
pub fn nested_cv_select<C: Clone>(
    candidates: &[C],
    examples: &[LabeledExample],
    inner_folds: usize,
    seed: u64,
    beta: f64,
    mut evaluate: impl FnMut(&C, &[u32], &[u32]) -> Result<f64, EvalError>,
) -> Result<(C, CvSelectionReport<C>), EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::NoCandidates);
    }
    let folds = kfold_iterative(examples, inner_folds, seed)?;
    let splits = folds.cv_splits();

    let mut scored = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let mut fold_scores = Vec::with_capacity(splits.len());
        let mut failed = false;
        for (train, test) in &splits {
            match evaluate(candidate, train, test) {
                Ok(score) => fold_scores.push(score),
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        let mean_score = if failed || fold_scores.is_empty() {
            f64::NEG_INFINITY
        } else {
            fold_scores.iter().sum::<f64>() / fold_scores.len() as f64
        };
        scored.push(CandidateScore { candidate: candidate.clone(), fold_scores, mean_score, failed });
    }

    if scored.iter().all(|s| s.failed) {
        return Err(EvalError::AllCandidatesFailed(candidates.len()));
    }

    const TIE: f64 = 1e-12;
    let mut best_index = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scored.iter().enumerate() {
        if !s.failed && s.mean_score > best_score + TIE {
            best_score = s.mean_score;
            best_index = i;
        }
    }

    let best = scored[best_index].candidate.clone();
    Ok((best, CvSelectionReport { beta, inner_folds, candidates: scored, best_index }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::TagId;

    fn examples(n: usize) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| LabeledExample {
                asn: i as u32 + 1,
                tags: [TagId::new(if i % 2 == 0 { "even" } else { "odd" }).unwrap()]
                    .into_iter()
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn grid_is_sorted_by_c_then_gamma() {
        let grid = hyper_grid(&[10.0, 0.1], &[1.0, 0.01]);
        assert_eq!(
            grid,
            vec![
                HyperParams { c: 0.1, gamma: 0.01 },
                HyperParams { c: 0.1, gamma: 1.0 },
                HyperParams { c: 10.0, gamma: 0.01 },
                HyperParams { c: 10.0, gamma: 1.0 },
            ]
        );
    }

    #[test]
    fn single_candidate_is_selected() {
        let grid = vec![HyperParams { c: 1.0, gamma: 0.5 }];
        let (best, report) =
            nested_cv_select(&grid, &examples(12), 3, 0, 0.5, |_, _, _| Ok(0.8)).unwrap();
        assert_eq!(best, grid[0]);
        assert_eq!(report.best_index, 0);
        assert_eq!(report.candidates[0].fold_scores.len(), 3);
    }

    #[test]
    fn higher_scoring_candidate_wins() {
        let grid = hyper_grid(&[0.1, 10.0], &[0.5]);
        let (best, _) = nested_cv_select(&grid, &examples(12), 3, 0, 0.5, |c, _, _| {
            Ok(if c.c > 1.0 { 1.0 } else { 0.2 })
        })
        .unwrap();
        assert_eq!(best.c, 10.0);
    }

    #[test]
    fn tie_prefers_smaller_c_then_gamma() {
        let grid = hyper_grid(&[0.1, 10.0], &[0.01, 1.0]);
        let (best, _) =
            nested_cv_select(&grid, &examples(12), 3, 0, 0.5, |_, _, _| Ok(0.9)).unwrap();
        assert_eq!(best, HyperParams { c: 0.1, gamma: 0.01 });
    }

    #[test]
    fn all_failing_candidates_is_an_error() {
        let grid = hyper_grid(&[1.0], &[1.0]);
        let err = nested_cv_select(&grid, &examples(9), 3, 0, 0.5, |_, _, _| {
            Err(EvalError::CandidateFailed("boom".into()))
        })
        .unwrap_err();
        assert!(matches!(err, EvalError::AllCandidatesFailed(1)));
    }

    #[test]
    fn failing_candidate_is_skipped() {
        let grid = hyper_grid(&[0.1, 10.0], &[0.5]);
        let (best, report) = nested_cv_select(&grid, &examples(12), 3, 0, 0.5, |c, _, _| {
            if c.c < 1.0 {
                Err(EvalError::CandidateFailed("no convergence".into()))
            } else {
                Ok(0.3)
            }
        })
        .unwrap();
        assert_eq!(best.c, 10.0);
        assert!(report.candidates[0].failed);
    }
}
