use std::hint::black_box;

use conjnli_core::iaft::{Classifier, ToyClassifier, ToyConfig};
use conjnli_core::srl::fusion::{synthetic_embeddings, FusionHead};
use conjnli_core::srl::viterbi_indices;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn viterbi(c: &mut Criterion) {
    let mut g = c.benchmark_group("viterbi");
    for (pieces, roles) in [(16, 2), (64, 4), (256, 8)] {
        let tags = conjnli_bench::tagset(roles);
        let scores = conjnli_bench::scores(pieces, tags.len(), 3);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{pieces}x{}", tags.len())), &scores, |b, s| {
            b.iter(|| viterbi_indices(black_box(s), pieces, &tags))
        });
    }
    g.finish();
}

fn toy_training(c: &mut Criterion) {
    let data = conjnli_bench::examples(1000);
    let mut g = c.benchmark_group("toy_classifier");
    g.sample_size(10);
    g.bench_function(format!("epoch_{}", data.len()), |b| {
        b.iter(|| {
            let mut m = ToyClassifier::new(ToyConfig::default());
            m.fit_batch(black_box(&data));
            m
        })
    });
    let mut model = ToyClassifier::new(ToyConfig::default());
    model.fit(&data);
    g.bench_function("predict", |b| b.iter(|| model.predict(black_box(&data[0]))));
    g.finish();
}

fn fusion(c: &mut Criterion) {
    let data = synthetic_embeddings(64, 768, 768, 1);
    let head = FusionHead::random(768, 768, 768, 2);
    let r = &data[0];
    c.bench_function("fusion_loss_and_grad_768", |b| {
        b.iter(|| head.loss_and_grad(black_box(&r.c_nli), &r.c_p, &r.c_h, r.label).unwrap())
    });
}

criterion_group!(benches, viterbi, toy_training, fusion);
criterion_main!(benches);
