use std::hint::black_box;

use criterion::Criterion;
use linnaeus_bench::multilabel_dataset;
use linnaeus_core::eval::compute_metrics;
use linnaeus_core::taxonomy::TagSet;

pub fn bench(c: &mut Criterion) {
    let (examples, universe) = multilabel_dataset(1000, 18, 5);
    let truth: Vec<TagSet> = examples.iter().map(|e| e.tags.clone()).collect();
    let (shifted, _) = multilabel_dataset(1000, 18, 6);
    let predictions: Vec<TagSet> = shifted.iter().map(|e| e.tags.clone()).collect();
    c.bench_function("compute_metrics_1000x18", |b| {
        b.iter(|| compute_metrics(black_box(&predictions), black_box(&truth), &universe).unwrap())
    });
}
