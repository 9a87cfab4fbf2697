//! Kernel functions.

use serde::{Deserialize, Serialize};

use super::SvmError;
use crate::matrix::{squared_distance, DenseMatrix};

/// exp(-gamma * ||x - y||^2), in (0, 1] for finite inputs.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    debug_assert!(gamma > 0.0);
    Ok((-gamma * squared_distance(x, y)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Rbf { gamma: f64 },
    Linear,
}

impl Kernel {
    /// Assumes equal dimensionality; callers validate shapes once per matrix.
    pub fn compute(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Kernel::Rbf { gamma } => (-gamma * squared_distance(x, y)).exp(),
            Kernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Full Gram matrix of the rows of `x`.
pub fn kernel_matrix(x: &DenseMatrix, kernel: Kernel) -> DenseMatrix {
    let n = x.rows();
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let value = kernel.compute(x.row(i), x.row(j));
            k.set(i, j, value);
            k.set(j, i, value);
        }
    }
    k
}
