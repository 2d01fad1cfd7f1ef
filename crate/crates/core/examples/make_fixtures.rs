//! Writes the synthetic Conj Dev/Test stand-ins under `fixtures/`.
//!
//! Rows are built so that label counts, conjunction buckets, quantifier and
//! negation counts (and the dev boolean share) match the published split
//! statistics. Run with `cargo run -p conjnli-core --example make_fixtures`.

use std::path::PathBuf;

use conjnli_core::evalkit::{save_dataset, DatasetRecord, LabeledDataset, Split};
use conjnli_core::{Label, LabelSource};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NOUNS: &[&str] =
    &["visitors", "students", "farmers", "workers", "players", "artists", "pilots", "nurses", "cooks", "guests"];
const QUANTS: &[&str] = &["Many", "Several", "Most", "Some", "Few", "All"];
const VERBS: &[(&str, &str)] = &[
    ("saw", "see"),
    ("painted", "paint"),
    ("cleaned", "clean"),
    ("visited", "visit"),
    ("liked", "like"),
    ("photographed", "photograph"),
    ("described", "describe"),
    ("repaired", "repair"),
];
const OBJECTS: &[&str] = &[
    "bridge", "tower", "garden", "harbor", "market", "chapel", "station", "museum", "library", "stadium", "park",
    "forest",
];

struct Spec {
    name: &'static str,
    split: Split,
    labels: [usize; 3],
    /// (conjunction list, count)
    shapes: Vec<(Vec<&'static str>, usize)>,
    quantifier: usize,
    negation: usize,
    non_boolean: Option<usize>,
}

fn shapes(two: [usize; 3], doubles: [usize; 3], singles: [usize; 3]) -> Vec<(Vec<&'static str>, usize)> {
    vec![
        (vec!["and", "or"], two[0]),
        (vec!["and", "but"], two[1]),
        (vec!["or", "but"], two[2]),
        (vec!["and", "and"], doubles[0]),
        (vec!["or", "or"], doubles[1]),
        (vec!["but", "but"], doubles[2]),
        (vec!["and"], singles[0]),
        (vec!["or"], singles[1]),
        (vec!["but"], singles[2]),
    ]
}

fn sentence(rng: &mut ChaCha8Rng, conjs: &[&str], quant: bool, neg: bool, drop_last: bool, swap: bool) -> String {
    let noun = NOUNS.choose(rng).unwrap();
    let det = if quant { QUANTS.choose(rng).unwrap() } else { &"The" };
    let (past, base) = *VERBS.choose(rng).unwrap();
    let verb = if neg { format!("did not {base}") } else { past.to_string() };
    let objs: Vec<&&str> = OBJECTS.choose_multiple(rng, conjs.len() + 2).collect();
    let mut s = format!("{det} {noun} {verb} the {}", objs[0]);
    let keep = if drop_last { conjs.len() - 1 } else { conjs.len() };
    for (i, c) in conjs.iter().take(keep).enumerate() {
        let o = if swap && i == keep - 1 { objs[conjs.len() + 1] } else { objs[i + 1] };
        if *c == "but" {
            s.push_str(&format!(", but the guides {past} the {o}"));
        } else {
            s.push_str(&format!(" {c} the {o}"));
        }
    }
    s.push('.');
    s
}

fn build(spec: &Spec, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<&str>> = Vec::new();
    for (conjs, n) in &spec.shapes {
        rows.extend(std::iter::repeat_n(conjs.clone(), *n));
    }
    let n = rows.len();
    rows.shuffle(&mut rng);
    let mut labels: Vec<Label> =
        Label::ALL.iter().zip(spec.labels).flat_map(|(l, k)| std::iter::repeat_n(*l, k)).collect();
    assert_eq!(labels.len(), n, "{}: label counts do not sum to the row count", spec.name);
    labels.shuffle(&mut rng);
    let pick = |rng: &mut ChaCha8Rng, k: usize| {
        let mut flags = vec![false; n];
        for i in rand::seq::index::sample(rng, n, k) {
            flags[i] = true;
        }
        flags
    };
    let quant = pick(&mut rng, spec.quantifier);
    let neg = pick(&mut rng, spec.negation);
    let non_boolean = spec.non_boolean.map(|k| pick(&mut rng, k));
    let records = (0..n)
        .map(|i| {
            let mut r = rng.clone();
            let premise = sentence(&mut r, &rows[i], quant[i], neg[i], false, false);
            let mut r = rng.clone();
            let hypothesis = match labels[i] {
                Label::Entailment => sentence(&mut r, &rows[i], quant[i], neg[i], true, false),
                Label::Neutral => format!("{} yesterday.", premise.trim_end_matches('.')),
                Label::Contradiction => sentence(&mut r, &rows[i], quant[i], neg[i], false, true),
            };
            // advance the shared stream once per row
            let _ = sentence(&mut rng, &rows[i], false, false, false, false);
            DatasetRecord {
                id: format!("{}-{:04}", spec.name, i + 1),
                premise,
                hypothesis,
                label: labels[i],
                label_source: LabelSource::Human,
                boolean: non_boolean.as_ref().map(|f| !f[i]),
            }
        })
        .collect();
    LabeledDataset::new(Some(spec.split), records).unwrap()
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let test = Spec {
        name: "conj-test",
        split: Split::Test,
        labels: [332, 467, 201],
        shapes: shapes([100, 25, 18], [50, 30, 6], [362, 323, 86]),
        quantifier: 175,
        negation: 101,
        non_boolean: None,
    };
    let dev = Spec {
        name: "conj-dev",
        split: Split::Dev,
        labels: [204, 281, 138],
        shapes: shapes([60, 17, 12], [35, 23, 5], [208, 198, 65]),
        quantifier: 131,
        negation: 70,
        non_boolean: Some(212),
    };
    for (spec, seed, file) in [(&test, 1000, "conj_test.jsonl"), (&dev, 623, "conj_dev.jsonl")] {
        let ds = build(spec, seed);
        let path = root.join(file);
        save_dataset(&path, &ds).unwrap();
        println!("wrote {} rows to {}", ds.len(), path.display());
    }
}
