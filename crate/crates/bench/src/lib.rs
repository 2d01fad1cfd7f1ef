//! Inputs shared by the benchmarks.

use conjnli_core::iaft::Example;
use conjnli_core::srl::BioTag;
use conjnli_core::synth::{synth_corpus, synth_pairs, to_example, SynthConfig};
use conjnli_core::{HeuristicConfig, NliPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn trees(sentences: usize) -> String {
    let config = SynthConfig { sentences, ..SynthConfig::default() };
    synth_corpus(&config).into_iter().map(|s| s.bracketed + "\n").collect()
}

/// Labeled pairs from `sentences` synthetic sentences (about five each).
pub fn pool(sentences: usize) -> Vec<NliPair> {
    let config = SynthConfig { sentences, ..SynthConfig::default() };
    synth_pairs(&config, &HeuristicConfig::default()).into_iter().map(|(p, _)| p).collect()
}

pub fn examples(sentences: usize) -> Vec<Example> {
    pool(sentences).iter().map(to_example).collect()
}

/// Tagset with `roles` argument types, each with B- and I- tags.
pub fn tagset(roles: usize) -> Vec<BioTag> {
    let mut tags = vec![BioTag::O];
    for r in 0..roles {
        tags.push(BioTag::B(format!("ARG{r}")));
        tags.push(BioTag::I(format!("ARG{r}")));
    }
    tags
}

pub fn scores(pieces: usize, tags: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pieces * tags).map(|_| rng.gen_range(-3.0..3.0)).collect()
}
