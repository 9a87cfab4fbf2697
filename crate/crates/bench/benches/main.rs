use criterion::{criterion_group, criterion_main};

mod kernel;
mod metrics;

criterion_group!(
    benches,
    kernel::bench,
    smo::bench,
    impute::bench,
    stratify::bench,
    metrics::bench,
);
criterion_main!(benches);
