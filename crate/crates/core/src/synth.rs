//! Synthetic bracketed corpus with NER tags and a matching replacement
//! lexicon, for demos, benchmarks and the train/eval experiments.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::iaft::Example;
use crate::labeler::{label_with_rule, HeuristicConfig, Rule};
use crate::pairgen::{generate_corpus, GenerationConfig, NliPair, ReplacementLexicon};
use crate::treebank::{parse_bracketed, Sentence, TreeRecord};
use crate::types::LabelSource;

const PEOPLE: &[&str] = &[
    "Alice", "Bob", "Carol", "David", "Emma", "Frank", "Grace", "Henry", "Irene", "James", "Karen", "Liam", "Maria",
    "Nathan", "Olivia", "Peter", "Quinn", "Rachel", "Samuel", "Tina",
];

/// (past, base) forms.
const TRANSITIVE: &[(&str, &str)] = &[
    ("visited", "visit"),
    ("painted", "paint"),
    ("cleaned", "clean"),
    ("photographed", "photograph"),
    ("described", "describe"),
    ("admired", "admire"),
    ("inspected", "inspect"),
    ("repaired", "repair"),
];

const INTRANSITIVE: &[&str] =
    &["sang", "danced", "slept", "laughed", "waited", "left", "arrived", "worked", "rested", "cried"];

const PLACES: &[&[&str]] = &[
    &["museum", "library", "chapel", "stadium", "tower", "station"],
    &["garden", "harbor", "market", "park", "beach", "forest"],
];

const GOODS: &[&[&str]] = &[
    &["apples", "pears", "plums", "cherries", "grapes", "peaches"],
    &["cars", "trucks", "buses", "bikes", "boats", "vans"],
];

const ANTONYMS: &[(&str, &str)] = &[
    ("large", "small"),
    ("bright", "dark"),
    ("warm", "cold"),
    ("quiet", "noisy"),
    ("clean", "dirty"),
    ("old", "new"),
    ("cheap", "expensive"),
    ("wide", "narrow"),
    ("heavy", "light"),
    ("soft", "hard"),
];

const THINGS: &[&str] = &["room", "house", "road", "box", "coat", "hall", "car", "bed"];

const ORG_PARTS: &[&str] = &[
    "Franklin",
    "Marshall",
    "Hobart",
    "William",
    "Lewis",
    "Clark",
    "Washington",
    "Lee",
    "Sweet",
    "Briar",
    "Johnson",
    "Wales",
];

const ORG_KINDS: &[&str] = &["College", "University", "Institute", "Foundation"];

const SOLD: &[&str] = &["sold", "shipped", "counted", "delivered", "stolen"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    Boolean,
    Trigger,
    NamedEntity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sentences: usize,
    pub seed: u64,
    /// Share of sentences with a collective trigger word.
    pub trigger_rate: f64,
    /// Share of sentences coordinating inside an organization name.
    pub entity_rate: f64,
    /// Share of boolean sentences with a negated "or".
    pub negation_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { sentences: 1000, seed: 0, trigger_rate: 0.1, entity_rate: 0.1, negation_rate: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSentence {
    pub bracketed: String,
    pub ner: Vec<String>,
    pub kind: TemplateKind,
}

/// Accumulates NER tags while leaves are emitted in order.
struct Builder {
    ner: Vec<String>,
}

impl Builder {
    fn w(&mut self, pos: &str, word: &str, ner: &str) -> String {
        self.ner.push(ner.to_string());
        format!("({pos} {word})")
    }

    fn o(&mut self, pos: &str, word: &str) -> String {
        self.w(pos, word, "O")
    }

    fn person(&mut self, name: &str) -> String {
        let leaf = self.w("NNP", name, "B-PER");
        format!("(NP {leaf})")
    }
}

fn node(label: &str, parts: Vec<String>) -> String {
    format!("({label} {})", parts.join(" "))
}

fn two<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> (&'a str, &'a str) {
    let picked: Vec<&&str> = pool.choose_multiple(rng, 2).collect();
    (picked[0], picked[1])
}

fn two_of<'a>(rng: &mut ChaCha8Rng, classes: &[&[&'a str]]) -> (&'a str, &'a str) {
    let class = classes[rng.gen_range(0..classes.len())];
    two(rng, class)
}

fn boolean_sentence(rng: &mut ChaCha8Rng, b: &mut Builder, conj: &str, negate: bool) -> String {
    let (p1, p2) = two(rng, PEOPLE);
    if negate {
        let (_, base) = *TRANSITIVE.choose(rng).unwrap();
        let (o1, o2) = two_of(rng, PLACES);
        return node(
            "S",
            vec![
                b.person(p1),
                node(
                    "VP",
                    vec![
                        b.o("VBD", "did"),
                        b.o("RB", "not"),
                        node(
                            "VP",
                            vec![
                                b.o("VB", base),
                                node(
                                    "NP",
                                    vec![
                                        node("NP", vec![b.o("DT", "the"), b.o("NN", o1)]),
                                        b.o("CC", "or"),
                                        node("NP", vec![b.o("DT", "the"), b.o("NN", o2)]),
                                    ],
                                ),
                            ],
                        ),
                    ],
                ),
                b.o(".", "."),
            ],
        );
    }
    let choice = if conj == "but" { rng.gen_range(2..4) } else { rng.gen_range(0..5) };
    match choice {
        0 => {
            let (past, _) = *TRANSITIVE.choose(rng).unwrap();
            let place = PLACES.choose(rng).unwrap().choose(rng).unwrap();
            node(
                "S",
                vec![
                    node("NP", vec![b.person(p1), b.o("CC", conj), b.person(p2)]),
                    node("VP", vec![b.o("VBD", past), node("NP", vec![b.o("DT", "the"), b.o("NN", place)])]),
                    b.o(".", "."),
                ],
            )
        }
        1 => {
            let (past, _) = *TRANSITIVE.choose(rng).unwrap();
            let (o1, o2) = two_of(rng, PLACES);
            node(
                "S",
                vec![
                    b.person(p1),
                    node(
                        "VP",
                        vec![
                            b.o("VBD", past),
                            node(
                                "NP",
                                vec![
                                    node("NP", vec![b.o("DT", "the"), b.o("NN", o1)]),
                                    b.o("CC", conj),
                                    node("NP", vec![b.o("DT", "the"), b.o("NN", o2)]),
                                ],
                            ),
                        ],
                    ),
                    b.o(".", "."),
                ],
            )
        }
        2 => {
            let thing = THINGS.choose(rng).unwrap();
            let pairs: Vec<&(&str, &str)> = ANTONYMS.choose_multiple(rng, 2).collect();
            let pick =
                |rng: &mut ChaCha8Rng, p: &(&'static str, &'static str)| if rng.gen_bool(0.5) { p.0 } else { p.1 };
            let a1 = pick(rng, pairs[0]);
            let a2 = pick(rng, pairs[1]);
            node(
                "S",
                vec![
                    node("NP", vec![b.o("DT", "The"), b.o("NN", thing)]),
                    node(
                        "VP",
                        vec![b.o("VBD", "was"), node("ADJP", vec![b.o("JJ", a1), b.o("CC", conj), b.o("JJ", a2)])],
                    ),
                    b.o(".", "."),
                ],
            )
        }
        3 => {
            let (v1, v2) = two(rng, INTRANSITIVE);
            node(
                "S",
                vec![
                    node("S", vec![b.person(p1), node("VP", vec![b.o("VBD", v1)])]),
                    b.o(",", ","),
                    b.o("CC", conj),
                    node("S", vec![b.person(p2), node("VP", vec![b.o("VBD", v2)])]),
                    b.o(".", "."),
                ],
            )
        }
        _ => {
            let (g1, g2) = two_of(rng, GOODS);
            let (n1, n2) = (rng.gen_range(2..60).to_string(), rng.gen_range(2..60).to_string());
            node(
                "S",
                vec![
                    b.person(p1),
                    node(
                        "VP",
                        vec![
                            b.o("VBD", "bought"),
                            node(
                                "NP",
                                vec![
                                    node("NP", vec![b.o("CD", &n1), b.o("NNS", g1)]),
                                    b.o("CC", conj),
                                    node("NP", vec![b.o("CD", &n2), b.o("NNS", g2)]),
                                ],
                            ),
                        ],
                    ),
                    b.o(".", "."),
                ],
            )
        }
    }
}

fn trigger_sentence(rng: &mut ChaCha8Rng, b: &mut Builder) -> String {
    let opener = match rng.gen_range(0..4) {
        0 => node("PP", vec![b.o("IN", "In"), node("NP", vec![b.o("NN", "total")])]),
        1 => node("PP", vec![b.o("IN", "In"), node("NP", vec![b.o("NN", "sum")])]),
        2 => node("ADVP", vec![b.o("RB", "Overall")]),
        _ => node("ADVP", vec![b.o("RB", "Altogether")]),
    };
    let (g1, g2) = two_of(rng, GOODS);
    let (n1, n2) = (rng.gen_range(2..60).to_string(), rng.gen_range(2..60).to_string());
    let verb = SOLD.choose(rng).unwrap();
    node(
        "S",
        vec![
            opener,
            b.o(",", ","),
            node(
                "NP",
                vec![
                    node("NP", vec![b.o("CD", &n1), b.o("NNS", g1)]),
                    b.o("CC", "and"),
                    node("NP", vec![b.o("CD", &n2), b.o("NNS", g2)]),
                ],
            ),
            node("VP", vec![b.o("VBD", "were"), node("VP", vec![b.o("VBN", verb)])]),
            b.o(".", "."),
        ],
    )
}

fn entity_sentence(rng: &mut ChaCha8Rng, b: &mut Builder, conj: &str) -> String {
    let p = PEOPLE.choose(rng).unwrap();
    let (o1, o2) = two(rng, ORG_PARTS);
    let kind = ORG_KINDS.choose(rng).unwrap();
    let (past, _) = *TRANSITIVE.choose(rng).unwrap();
    node(
        "S",
        vec![
            b.person(p),
            node(
                "VP",
                vec![
                    b.o("VBD", past),
                    node(
                        "NP",
                        vec![
                            b.w("NNP", o1, "B-ORG"),
                            b.w("CC", conj, "I-ORG"),
                            b.w("NNP", o2, "I-ORG"),
                            b.w("NNP", kind, "I-ORG"),
                        ],
                    ),
                ],
            ),
            b.o(".", "."),
        ],
    )
}

/// Generates `config.sentences` trees, each with exactly one coordinating
/// conjunction. Conjunctions of boolean sentences are drawn uniformly from
/// and/or/but.
pub fn synth_corpus(config: &SynthConfig) -> Vec<SynthSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.sentences)
        .map(|_| {
            let mut b = Builder { ner: Vec::new() };
            let r: f64 = rng.gen();
            let (bracketed, kind) = if r < config.trigger_rate {
                (trigger_sentence(&mut rng, &mut b), TemplateKind::Trigger)
            } else if r < config.trigger_rate + config.entity_rate {
                let conj = if rng.gen_bool(0.5) { "and" } else { "or" };
                (entity_sentence(&mut rng, &mut b, conj), TemplateKind::NamedEntity)
            } else {
                let conj = *["and", "or", "but"].choose(&mut rng).unwrap();
                let negate = conj == "or" && rng.gen_bool(config.negation_rate.clamp(0.0, 1.0));
                (boolean_sentence(&mut rng, &mut b, conj, negate), TemplateKind::Boolean)
            };
            SynthSentence { bracketed, ner: b.ner, kind }
        })
        .collect()
}

/// Parses synthetic sentences into records with NER attached.
pub fn to_records(sentences: &[SynthSentence], source: &str) -> Vec<TreeRecord> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let tree = parse_bracketed(&s.bracketed).expect("synthetic trees are well formed");
            let sentence = Sentence::from_tree(&tree, format!("{source}:{}", i + 1)).with_ner(s.ner.clone());
            TreeRecord { tree, sentence }
        })
        .collect()
}

/// Antonyms, co-hyponym classes and names covering the synthetic vocabulary.
pub fn synth_lexicon() -> ReplacementLexicon {
    let mut antonyms = BTreeMap::new();
    for (a, b) in ANTONYMS {
        antonyms.insert(a.to_string(), b.to_string());
        antonyms.insert(b.to_string(), a.to_string());
    }
    let mut co_hyponyms = BTreeMap::new();
    for class in PLACES.iter().chain(GOODS) {
        for w in class.iter() {
            co_hyponyms.insert(w.to_string(), class.iter().filter(|x| *x != w).map(|x| x.to_string()).collect());
        }
    }
    for w in INTRANSITIVE {
        co_hyponyms.insert(w.to_string(), INTRANSITIVE.iter().filter(|x| *x != w).map(|x| x.to_string()).collect());
    }
    ReplacementLexicon { antonyms, co_hyponyms, name_pool: PEOPLE.iter().map(|s| s.to_string()).collect() }
}

/// Generates and labels pairs from a synthetic corpus.
pub fn synth_pairs(config: &SynthConfig, heuristics: &HeuristicConfig) -> Vec<(NliPair, Rule)> {
    let records = to_records(&synth_corpus(config), "synth");
    let generated = generate_corpus(&records, &synth_lexicon(), &GenerationConfig::with_seed(config.seed));
    generated
        .pairs
        .into_iter()
        .map(|mut p| {
            let (label, rule) = label_with_rule(&p, heuristics);
            p.set_label(label, LabelSource::Heuristic);
            (p, rule)
        })
        .collect()
}

pub fn to_example(p: &NliPair) -> Example {
    Example::new(p.premise.clone(), p.hypothesis.clone(), p.label.expect("labeled pair"))
}

/// Base data follows the boolean rules; adversarial data holds only pairs
/// decided by the named-entity or trigger rules, whose labels clash with the
/// boolean reading of the same operations.
#[derive(Debug, Clone)]
pub struct ConflictTask {
    pub base_train: Vec<Example>,
    pub base_eval: Vec<Example>,
    pub adv_train: Vec<Example>,
    pub adv_eval: Vec<Example>,
}

pub fn conflict_task(seed: u64, base_sentences: usize, adv_sentences: usize) -> ConflictTask {
    let heuristics = HeuristicConfig::default();
    let base_cfg =
        SynthConfig { sentences: base_sentences, seed, trigger_rate: 0.0, entity_rate: 0.0, negation_rate: 0.1 };
    let mut base: Vec<Example> = synth_pairs(&base_cfg, &heuristics).iter().map(|(p, _)| to_example(p)).collect();
    let adv_cfg = SynthConfig {
        sentences: adv_sentences,
        seed: seed ^ 0xADD,
        trigger_rate: 0.5,
        entity_rate: 0.5,
        negation_rate: 0.0,
    };
    let mut adv: Vec<Example> = synth_pairs(&adv_cfg, &heuristics)
        .iter()
        .filter(|(_, r)| matches!(r, Rule::NamedEntity | Rule::Trigger))
        .map(|(p, _)| to_example(p))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    base.shuffle(&mut rng);
    adv.shuffle(&mut rng);
    let bcut = base.len() * 4 / 5;
    let acut = adv.len() * 4 / 5;
    let base_eval = base.split_off(bcut);
    let adv_eval = adv.split_off(acut);
    ConflictTask { base_train: base, base_eval, adv_train: adv, adv_eval }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjunct::find_coordinations;
    use crate::iaft::{accuracy, ToyClassifier, ToyConfig};
    use crate::types::{ConjWord, Label, Operation};

    #[test]
    fn every_sentence_has_one_coordination() {
        let cfg = SynthConfig { sentences: 300, seed: 3, ..Default::default() };
        let sents = synth_corpus(&cfg);
        for rec in to_records(&sents, "t") {
            assert_eq!(rec.sentence.ner.as_ref().unwrap().len(), rec.sentence.tokens.len());
            let c = find_coordinations(&rec.tree, &rec.sentence).unwrap();
            assert_eq!(c.instances.len(), 1, "{}", rec.sentence.text());
            assert!(c.warnings.is_empty());
        }
        assert!(sents.iter().any(|s| s.kind == TemplateKind::Trigger));
        assert!(sents.iter().any(|s| s.kind == TemplateKind::NamedEntity));
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig { sentences: 50, seed: 11, ..Default::default() };
        assert_eq!(synth_corpus(&cfg), synth_corpus(&cfg));
        assert!(synth_lexicon().validate().is_ok());
    }

    #[test]
    fn entity_sentences_are_flagged() {
        let cfg = SynthConfig { sentences: 40, seed: 1, trigger_rate: 0.0, entity_rate: 1.0, negation_rate: 0.0 };
        for (p, rule) in synth_pairs(&cfg, &HeuristicConfig::default()) {
            assert!(p.flags.in_named_entity);
            assert_eq!(rule, Rule::NamedEntity);
            assert_eq!(p.label, Some(Label::Neutral));
        }
    }

    #[test]
    fn trigger_removals_contradict() {
        let cfg = SynthConfig { sentences: 40, seed: 2, trigger_rate: 1.0, entity_rate: 0.0, negation_rate: 0.0 };
        let pairs = synth_pairs(&cfg, &HeuristicConfig::default());
        let removes: Vec<_> = pairs.iter().filter(|(p, _)| p.operation == Operation::Remove).collect();
        assert_eq!(removes.len(), 80);
        assert!(removes.iter().all(|(p, r)| *r == Rule::Trigger && p.label == Some(Label::Contradiction)));
    }

    #[test]
    fn all_three_buckets_are_populated() {
        let pairs =
            synth_pairs(&SynthConfig { sentences: 600, seed: 4, ..Default::default() }, &HeuristicConfig::default());
        for c in [ConjWord::And, ConjWord::Or, ConjWord::But] {
            let n = pairs.iter().filter(|(p, _)| p.conj_word == c).count();
            assert!(n > 400, "{c:?}: {n}");
        }
    }

    #[test]
    fn toy_learns_boolean_rules() {
        let cfg = SynthConfig { sentences: 200, seed: 7, trigger_rate: 0.0, entity_rate: 0.0, negation_rate: 0.1 };
        let pairs = synth_pairs(&cfg, &HeuristicConfig::boolean_only());
        let mut all: Vec<Example> = pairs.iter().map(|(p, _)| to_example(p)).collect();
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        let test = all.split_off(200);
        let train = &all[..200];
        let mut m = ToyClassifier::new(ToyConfig::default());
        m.fit(train);
        let acc = accuracy(&m, &test);
        assert!(acc >= 0.95, "held-out accuracy {acc}");
    }
}
