//! Shared dataset builders for the benchmarks.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use linnaeus_core::eval::LabeledExample;
use linnaeus_core::matrix::DenseMatrix;
use linnaeus_core::taxonomy::{TagId, TagSet};

/// Two well-separated clusters in the plane with +-1 labels.
pub fn blobs(per_class: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..per_class {
        rows.push(vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]);
        labels.push(1.0);
    }
    for _ in 0..per_class {
        rows.push(vec![rng.random_range(3.0..4.0), rng.random_range(3.0..4.0)]);
        labels.push(-1.0);
    }
    (DenseMatrix::from_rows(&rows), labels)
}

/// Random multi-label dataset with skewed label frequencies.
pub fn multilabel_dataset(n: usize, n_labels: usize, seed: u64) -> (Vec<LabeledExample>, Vec<TagId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<TagId> =
        (0..n_labels).map(|i| TagId::new(format!("l{i:02}")).unwrap()).collect();
    let weights: Vec<f64> = (0..n_labels).map(|i| 0.5 / (i + 1) as f64).collect();
    let examples = (0..n)
        .map(|i| LabeledExample {
            asn: i as u32 + 1,
            tags: labels
                .iter()
                .zip(&weights)
                .filter(|(_, &w)| rng.random_bool(w))
                .map(|(l, _)| l.clone())
                .collect::<TagSet>(),
        })
        .collect();
    (examples, labels)
}

/// Random feature matrix with a fraction of NaN holes.
pub fn holey_matrix(rows: usize, cols: usize, missing: f64, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random_bool(missing) {
                        f64::NAN
                    } else {
                        rng.random_range(-10.0..10.0)
                    }
                })
                .collect()
        })
        .collect();
    DenseMatrix::from_rows(&data)
}
