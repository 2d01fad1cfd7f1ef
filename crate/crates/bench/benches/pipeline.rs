use std::hint::black_box;

use conjnli_core::pairgen::{generate_corpus, GenerationConfig};
use conjnli_core::synth::synth_lexicon;
use conjnli_core::treebank::parse_trees;
use conjnli_core::{build_adversarial_set, HeuristicConfig};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

fn parse(c: &mut Criterion) {
    let text = conjnli_bench::trees(1000);
    let mut g = c.benchmark_group("treebank");
    g.throughput(Throughput::Bytes(text.len() as u64));
    g.bench_function("parse_1000_trees", |b| b.iter(|| parse_trees(black_box(&text), None, "bench").unwrap()));
    g.finish();
}

fn generate(c: &mut Criterion) {
    let records = parse_trees(&conjnli_bench::trees(1000), None, "bench").unwrap();
    let lex = synth_lexicon();
    let config = GenerationConfig::with_seed(0);
    c.bench_function("generate_1000_sentences", |b| b.iter(|| generate_corpus(black_box(&records), &lex, &config)));
}

fn build_adv(c: &mut Criterion) {
    let pool = conjnli_bench::pool(11_000);
    let config = HeuristicConfig::default();
    let mut g = c.benchmark_group("build_adv");
    g.sample_size(10);
    g.bench_function(format!("15000_of_{}", pool.len()), |b| {
        b.iter_batched(
            || pool.clone(),
            |p| build_adversarial_set(&p, &config, 15_000, 1).unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

criterion_group!(benches, parse, generate, build_adv);
criterion_main!(benches);
