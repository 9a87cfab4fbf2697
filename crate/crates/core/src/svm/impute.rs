//! k-nearest-neighbor imputation of NaN cells.

use serde::{Deserialize, Serialize};

use super::SvmError;
use crate::matrix::DenseMatrix;

/// Retains the fit-time matrix: at transform time the donors for feature `j`
/// are the training rows observed in `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModel {
    pub k: usize,
    pub training: DenseMatrix,
    /// Used when a missing cell has no usable donor.
    pub fallback: f64,
}

pub fn fit_imputer(x: &DenseMatrix, k: usize) -> Result<ImputationModel, SvmError> {
    if x.rows() == 0 {
        return Err(SvmError::EmptyMatrix);
    }
    if k == 0 {
        return Err(SvmError::InvalidK);
    }
    for (row, values) in x.iter_rows().enumerate() {
        if let Some(col) = values.iter().position(|v| v.is_infinite()) {
            return Err(SvmError::NonFinite { row, col });
        }
    }
    Ok(ImputationModel { k, training: x.clone(), fallback: 0.0 })
}

/// Distance between rows restricted to features observed in both; `None` when
/// they share no observed feature.
fn partial_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut sum = 0.0;
    let mut seen = false;
    for (x, y) in a.iter().zip(b) {
        if x.is_nan() || y.is_nan() {
            continue;
        }
        seen = true;
        sum += (x - y) * (x - y);
    }
    seen.then(|| sum.sqrt())
}

/// Fills each missing cell with the mean of that feature over the `k` nearest
/// donor rows; observed cells pass through unchanged.
pub fn impute(model: &ImputationModel, x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for row in 0..x.rows() {
        let query = x.row(row);
        for col in 0..x.cols() {
            if !x.get(row, col).is_nan() {
                continue;
            }
            // (distance, training row index), ties broken by index.
            let mut donors: Vec<(f64, usize)> = Vec::new();
            for (ti, train_row) in model.training.iter_rows().enumerate() {
                if train_row[col].is_nan() {
                    continue;
                }
                if let Some(d) = partial_distance(query, train_row) {
                    donors.push((d, ti));
                }
            }
            donors.sort_by(|a, b| a.partial_cmp(b).unwrap());
            donors.truncate(model.k);
            let value = if donors.is_empty() {
                model.fallback
            } else {
                donors.iter().map(|&(_, ti)| model.training.get(ti, col)).sum::<f64>()
                    / donors.len() as f64
            };
            out.set(row, col, value);
        }
    }
    out
}
