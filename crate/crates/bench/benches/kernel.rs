use std::hint::black_box;

use criterion::Criterion;
use linnaeus_bench::blobs;
use linnaeus_core::svm::{kernel_matrix, Kernel};

pub fn bench(c: &mut Criterion) {
    let (x, _) = blobs(100, 1);
    c.bench_function("rbf_kernel_matrix_200x200", |b| {
        b.iter(|| kernel_matrix(black_box(&x), Kernel::Rbf { gamma: 0.5 }))
    });
}
