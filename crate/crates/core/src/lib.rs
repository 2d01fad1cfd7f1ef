//! Conjunctive NLI toolkit: reads constituency parses, locates coordinations,
//! generates premise/hypothesis pairs by editing conjuncts, labels them with
//! boolean and non-boolean heuristics, trains classifiers with an iterative
//! adversarial fine-tuning schedule, decodes BIO tags under well-formedness
//! constraints and evaluates predictions with per-phenomenon breakdowns.

pub mod conjunct;
pub mod evalkit;
pub mod iaft;
pub mod labeler;
pub mod pairgen;
pub mod srl;
pub mod synth;
pub mod text;
pub mod treebank;
pub mod types;

pub use conjunct::{detect_features, find_coordinations, CoordinationInstance, FeatureLexicons, SentenceFeatures};
pub use labeler::{build_adversarial_set, label_pair, HeuristicConfig};
pub use pairgen::{generate_pairs, NliPair, ReplacementLexicon};
pub use treebank::{parse_bracketed, ParseNode, Sentence};
pub use types::{ConjBucket, ConjWord, Label, LabelSource, Operation, ReplacementKind, Side, Span};
