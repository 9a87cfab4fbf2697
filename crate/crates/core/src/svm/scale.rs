//! Per-feature standardization to zero mean and unit variance.

use serde::{Deserialize, Serialize};

use super::SvmError;
use crate::matrix::DenseMatrix;

/// Population statistics per feature; constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingModel {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

pub fn fit_scaler(x: &DenseMatrix) -> Result<ScalingModel, SvmError> {
    if x.rows() == 0 {
        return Err(SvmError::EmptyMatrix);
    }
    let n = x.rows() as f64;
    let mut means = vec![0.0; x.cols()];
    let mut stds = vec![0.0; x.cols()];
    let mut constant = vec![false; x.cols()];
    for col in 0..x.cols() {
        let mean = (0..x.rows()).map(|r| x.get(r, col)).sum::<f64>() / n;
        let variance = (0..x.rows()).map(|r| (x.get(r, col) - mean).powi(2)).sum::<f64>() / n;
        means[col] = mean;
        stds[col] = variance.sqrt();
        constant[col] = stds[col] == 0.0;
    }
    Ok(ScalingModel { means, stds, constant })
}

pub fn scale(model: &ScalingModel, x: &DenseMatrix) -> Result<DenseMatrix, SvmError> {
    if x.cols() != model.means.len() {
        return Err(SvmError::DimensionMismatch { expected: model.means.len(), found: x.cols() });
    }
    let mut out = x.clone();
    for row in 0..x.rows() {
        for col in 0..x.cols() {
            let value = if model.constant[col] {
                0.0
            } else {
                (x.get(row, col) - model.means[col]) / model.stds[col]
            };
            out.set(row, col, value);
        }
    }
    Ok(out)
}
