//! Sigmoid calibration of decision values into probabilities.
//!
//! Newton fit with backtracking line search on the regularized maximum
//! likelihood objective, with smoothed targets to avoid saturated fits. The
//! slope is clamped to keep the calibrated probability non-decreasing in the
//! decision value.

use serde::{Deserialize, Serialize};

/// P(y = +1 | decision d) = 1 / (1 + exp(a*d + b)), with a <= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattCalibrator {
    pub a: f64,
    pub b: f64,
}

impl PlattCalibrator {
    pub fn probability(&self, decision: f64) -> f64 {
        let z = self.a * decision + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

fn objective(decisions: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    let mut value = 0.0;
    for (&d, &t) in decisions.iter().zip(targets) {
        let z = a * d + b;
        if z >= 0.0 {
            value += t * z + (1.0 + (-z).exp()).ln();
        } else {
            value += (t - 1.0) * z + (1.0 + z.exp()).ln();
        }
    }
    value
}

/// Fits the sigmoid on (decision value, +-1 label) pairs.
pub fn fit_platt(decisions: &[f64], labels: &[f64]) -> PlattCalibrator {
    debug_assert_eq!(decisions.len(), labels.len());
    let positives = labels.iter().filter(|&&y| y > 0.0).count() as f64;
    let negatives = labels.len() as f64 - positives;
    let hi_target = (positives + 1.0) / (positives + 2.0);
    let lo_target = 1.0 / (negatives + 2.0);
    let targets: Vec<f64> =
        labels.iter().map(|&y| if y > 0.0 { hi_target } else { lo_target }).collect();

    let prior_b = ((negatives + 1.0) / (positives + 1.0)).ln();
    let mut a = 0.0;
    let mut b = prior_b;
    let mut fval = objective(decisions, &targets, a, b);

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    for _ in 0..MAX_ITER {
        let mut h11 = SIGMA;
        let mut h22 = SIGMA;
        let mut h21 = 0.0;
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for (&d, &t) in decisions.iter().zip(&targets) {
            let z = a * d + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += d * d * d2;
            h22 += d2;
            h21 += d * d2;
            let d1 = t - p;
            g1 += d * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        loop {
            let new_a = a + step * da;
            let new_b = b + step * db;
            let new_f = objective(decisions, &targets, new_a, new_b);
            if new_f < fval + 1e-4 * step * gd {
                a = new_a;
                b = new_b;
                fval = new_f;
                break;
            }
            step /= 2.0;
            if step < MIN_STEP {
                return finish(a, b, prior_b);
            }
        }
    }
    finish(a, b, prior_b)
}

fn finish(a: f64, b: f64, prior_b: f64) -> PlattCalibrator {
    if a > 0.0 {
        // Anti-correlated fit: fall back to the constant base-rate sigmoid so
        // probability stays non-decreasing in the decision value.
        PlattCalibrator { a: 0.0, b: prior_b }
    } else {
        PlattCalibrator { a, b }
    }
}
