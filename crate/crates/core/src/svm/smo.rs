//! Sequential-minimal-optimization solver for the soft-margin dual.
//!
//! Works on a precomputed Gram matrix and repeatedly optimizes the maximal
//! violating pair until the KKT gap drops below the tolerance. The pairwise
//! update preserves the equality constraint sum(alpha_i * y_i) = 0 by
//! construction.

use super::SvmError;
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy)]
pub struct SmoConfig {
    /// Box constraint.
    pub c: f64,
    /// KKT gap tolerance.
    pub tol: f64,
    /// Hard iteration cap; exceeding it is an error.
    pub max_iter: usize,
}

impl SmoConfig {
    pub fn new(c: f64) -> Self {
        SmoConfig { c, tol: 1e-3, max_iter: 0 }
    }

    fn iteration_cap(&self, n: usize) -> usize {
        if self.max_iter > 0 {
            self.max_iter
        } else {
            10_000.max(100 * n)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl SmoSolution {
    /// Decision value for a point given its kernel row against the training
    /// set: sum_i alpha_i y_i K(x_i, x) + b.
    pub fn decision(&self, kernel_row: &[f64], labels: &[f64]) -> f64 {
        self.alphas
            .iter()
            .zip(labels)
            .zip(kernel_row)
            .map(|((&a, &y), &k)| a * y * k)
            .sum::<f64>()
            + self.bias
    }
}

/// Solves min 1/2 a'Qa - e'a subject to 0 <= a_i <= C and sum(a_i y_i) = 0,
/// with Q_ij = y_i y_j K_ij. `labels` must be +-1 with both classes present.
pub fn solve_smo(
    kernel: &DenseMatrix,
    labels: &[f64],
    config: &SmoConfig,
) -> Result<SmoSolution, SvmError> {
    let n = labels.len();
    if n == 0 || kernel.rows() != n || kernel.cols() != n {
        return Err(SvmError::DimensionMismatch { expected: n, found: kernel.rows() });
    }
    if !labels.iter().any(|&y| y > 0.0) || !labels.iter().any(|&y| y < 0.0) {
        return Err(SvmError::OneClass);
    }
    let c = config.c;
    let cap = config.iteration_cap(n);

    let mut alphas = vec![0.0f64; n];
    // Gradient of the dual objective: G_i = (Q a)_i - 1; -y_i G_i = y_i - u_i.
    let mut grad = vec![-1.0f64; n];

    let mut iterations = 0usize;
    let bias;
    loop {
        // Maximal violating pair.
        let mut i_up = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut j_low = usize::MAX;
        let mut big_m = f64::INFINITY;
        for t in 0..n {
            let y = labels[t];
            let value = -y * grad[t];
            let in_up = (y > 0.0 && alphas[t] < c) || (y < 0.0 && alphas[t] > 0.0);
            let in_low = (y < 0.0 && alphas[t] < c) || (y > 0.0 && alphas[t] > 0.0);
            if in_up && value > m {
                m = value;
                i_up = t;
            }
            if in_low && value < big_m {
                big_m = value;
                j_low = t;
            }
        }
        if i_up == usize::MAX || j_low == usize::MAX || m - big_m <= config.tol {
            bias = match (i_up, j_low) {
                (usize::MAX, _) | (_, usize::MAX) => 0.0,
                _ => (m + big_m) / 2.0,
            };
            break;
        }
        if iterations >= cap {
            return Err(SvmError::NoConvergence { iterations, tag: None });
        }
        iterations += 1;

        let (i, j) = (i_up, j_low);
        let quad =
            (kernel.get(i, i) + kernel.get(j, j) - 2.0 * kernel.get(i, j)).max(1e-12);
        // Unconstrained step along alpha_i += y_i t, alpha_j -= y_j t.
        let mut step = (m - big_m) / quad;
        let room_i = if labels[i] > 0.0 { c - alphas[i] } else { alphas[i] };
        let room_j = if labels[j] > 0.0 { alphas[j] } else { c - alphas[j] };
        step = step.min(room_i).min(room_j);

        alphas[i] = (alphas[i] + labels[i] * step).clamp(0.0, c);
        alphas[j] = (alphas[j] - labels[j] * step).clamp(0.0, c);
        for t in 0..n {
            grad[t] += labels[t] * step * (kernel.get(t, i) - kernel.get(t, j));
        }
    }

    Ok(SmoSolution { alphas, bias, iterations })
}
