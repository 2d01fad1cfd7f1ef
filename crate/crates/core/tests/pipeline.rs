use std::collections::BTreeMap;
use std::path::PathBuf;

use conjnli_core::evalkit::{evaluate, load_dataset, Split};
use conjnli_core::labeler::label_pair;
use conjnli_core::pairgen::{generate_corpus, GenerationConfig};
use conjnli_core::treebank::read_trees;
use conjnli_core::{FeatureLexicons, HeuristicConfig, Label, NliPair, ReplacementLexicon};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn golden_pairs() -> Vec<NliPair> {
    let records = read_trees(&fixture("golden.trees"), None).unwrap();
    assert_eq!(records.len(), 10);
    let lex = ReplacementLexicon::load(&fixture("golden_lexicon.json")).unwrap();
    generate_corpus(&records, &lex, &GenerationConfig::with_seed(0)).pairs
}

fn find<'a>(pairs: &'a [NliPair], premise: &str, hypothesis: &str) -> &'a NliPair {
    pairs
        .iter()
        .find(|p| p.premise == premise && p.hypothesis == hypothesis)
        .unwrap_or_else(|| panic!("no generated pair {premise:?} => {hypothesis:?}"))
}

#[test]
fn golden_boolean_examples() {
    let pairs = golden_pairs();
    let gold = load_dataset(&fixture("golden_labels.jsonl"), None).unwrap();
    let cfg = HeuristicConfig::boolean_only();
    for g in &gold.records[..3] {
        let p = find(&pairs, &g.premise, &g.hypothesis);
        assert_eq!(label_pair(p, &cfg), g.label, "{}", g.id);
    }
}

#[test]
fn golden_negated_or_with_all_rules() {
    let pairs = golden_pairs();
    let p = find(
        &pairs,
        "All devices they tested did not produce gravity or anti-gravity.",
        "All devices they tested did not produce gravity.",
    );
    assert!(p.flags.negated);
    assert_eq!(label_pair(p, &HeuristicConfig::all_rules()), Label::Entailment);
}

#[test]
fn golden_trigger_sentence_contradicts() {
    let pairs = golden_pairs();
    let p = find(
        &pairs,
        "Its total running time is 9 minutes and 9 seconds, spanning seven tracks.",
        "Its total running time is 9 minutes, spanning seven tracks.",
    );
    assert_eq!(label_pair(p, &HeuristicConfig::default()), Label::Contradiction);
}

#[test]
fn conj_test_fixture_statistics() {
    let ds = load_dataset(&fixture("conj_test.jsonl"), Some(Split::Test)).unwrap();
    assert_eq!(ds.label_counts(), [332, 467, 201]);
    let always_neutral: BTreeMap<String, Label> = ds.records.iter().map(|r| (r.id.clone(), Label::Neutral)).collect();
    let rep = evaluate(&always_neutral, &ds, &FeatureLexicons::default()).unwrap();
    let sizes: Vec<usize> = ["and", "or", "but", "multiple", "quantifier", "negation"]
        .iter()
        .map(|b| rep.bucket(b).unwrap().size)
        .collect();
    assert_eq!(sizes, [537, 471, 135, 229, 175, 101]);
    assert_eq!(rep.accuracy, 0.467);
}

#[test]
fn conj_dev_fixture_statistics() {
    let ds = load_dataset(&fixture("conj_dev.jsonl"), Some(Split::Dev)).unwrap();
    assert_eq!(ds.len(), 623);
    assert_eq!(ds.label_counts(), [204, 281, 138]);
    let gold: BTreeMap<String, Label> = ds.records.iter().map(|r| (r.id.clone(), r.label)).collect();
    let rep = evaluate(&gold, &ds, &FeatureLexicons::default()).unwrap();
    let sizes: Vec<usize> = ["and", "or", "but", "multiple", "quantifier", "negation"]
        .iter()
        .map(|b| rep.bucket(b).unwrap().size)
        .collect();
    assert_eq!(sizes, [320, 293, 99, 152, 131, 70]);
    assert_eq!(rep.bucket("non-boolean").unwrap().size, 212);
    assert!(rep.buckets.iter().all(|b| b.accuracy.is_none_or(|a| a == 1.0)));
}
