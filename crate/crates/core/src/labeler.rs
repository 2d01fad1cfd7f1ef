//! Rule-based labels for generated pairs and the conjunction-balanced
//! adversarial training set.
//!
//! Boolean semantics give the base map (remove => entailment, add =>
//! neutral, replace => contradiction). Non-boolean heuristics override it:
//! coordinations inside a named entity are neutral, and an "and" removal in a
//! premise carrying a collective trigger word ("total", "combined", ...) is a
//! contradiction. An optional De Morgan rule treats removal under a negated
//! "or" as entailment.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairgen::NliPair;
use crate::text::lower_words;
use crate::types::{ConjBucket, ConjWord, Label, LabelSource, Operation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    pub trigger_words: BTreeSet<String>,
    pub enable_named_entity_rule: bool,
    pub enable_trigger_rule: bool,
    pub enable_demorgan_rule: bool,
    pub or_replace_label: Label,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            trigger_words: ["total", "group", "combined", "sum", "overall", "altogether", "jointly", "collectively"]
                .into_iter()
                .map(String::from)
                .collect(),
            enable_named_entity_rule: true,
            enable_trigger_rule: true,
            enable_demorgan_rule: false,
            or_replace_label: Label::Neutral,
        }
    }
}

impl HeuristicConfig {
    /// Only the boolean map; every non-boolean rule off.
    pub fn boolean_only() -> Self {
        HeuristicConfig {
            enable_named_entity_rule: false,
            enable_trigger_rule: false,
            enable_demorgan_rule: false,
            ..Default::default()
        }
    }

    pub fn all_rules() -> Self {
        HeuristicConfig { enable_demorgan_rule: true, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        if self.enable_trigger_rule && self.trigger_words.is_empty() {
            return Err(LabelError::Config("trigger rule enabled with an empty trigger list".into()));
        }
        if self.or_replace_label == Label::Entailment {
            return Err(LabelError::Config("or_replace_label must be neutral or contradiction".into()));
        }
        Ok(())
    }

    fn has_trigger(&self, premise: &str) -> bool {
        lower_words(premise).iter().any(|w| self.trigger_words.contains(w))
    }
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("invalid heuristic config: {0}")]
    Config(String),
    #[error("not enough labeled pairs in bucket '{bucket}': need {needed}, have {available} (short by {})", needed - available)]
    Insufficient { bucket: ConjBucket, needed: usize, available: usize },
    #[error("target size {0} is not a positive multiple of 3")]
    BadSize(usize),
}

/// Which rule fired; exposed for audits and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Probe,
    NamedEntity,
    Trigger,
    DeMorgan,
    BooleanAnd,
    BooleanOr,
}

/// Label plus the rule responsible for it.
pub fn label_with_rule(pair: &NliPair, config: &HeuristicConfig) -> (Label, Rule) {
    use Operation::*;
    if pair.operation == EitherOrProbe {
        return (Label::Neutral, Rule::Probe);
    }
    if config.enable_named_entity_rule && pair.flags.in_named_entity {
        return (Label::Neutral, Rule::NamedEntity);
    }
    if config.enable_trigger_rule
        && pair.conj_word == ConjWord::And
        && pair.operation == Remove
        && config.has_trigger(&pair.premise)
    {
        return (Label::Contradiction, Rule::Trigger);
    }
    let is_or = matches!(pair.conj_word, ConjWord::Or | ConjWord::Nor);
    if config.enable_demorgan_rule && pair.flags.negated && is_or && pair.operation == Remove {
        return (Label::Entailment, Rule::DeMorgan);
    }
    match (is_or, pair.operation) {
        (false, Remove) => (Label::Entailment, Rule::BooleanAnd),
        (false, Add) => (Label::Neutral, Rule::BooleanAnd),
        (false, Replace) => (Label::Contradiction, Rule::BooleanAnd),
        (true, Remove) => (Label::Entailment, Rule::BooleanOr),
        (true, Add) => (Label::Neutral, Rule::BooleanOr),
        (true, Replace) => (config.or_replace_label, Rule::BooleanOr),
        (_, EitherOrProbe) => unreachable!(),
    }
}

pub fn label_pair(pair: &NliPair, config: &HeuristicConfig) -> Label {
    label_with_rule(pair, config).0
}

/// Labels every unlabeled pair in place; pairs that already carry a label keep it.
pub fn label_all(pairs: &mut [NliPair], config: &HeuristicConfig) {
    for p in pairs.iter_mut().filter(|p| p.label.is_none()) {
        let l = label_pair(p, config);
        p.set_label(l, LabelSource::Heuristic);
    }
}

/// Label x conjunction-bucket counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratificationReport {
    pub counts: BTreeMap<ConjBucket, BTreeMap<Label, usize>>,
    pub per_bucket: BTreeMap<ConjBucket, usize>,
    pub per_label: BTreeMap<Label, usize>,
    pub total: usize,
}

impl StratificationReport {
    pub fn of(pairs: &[NliPair]) -> Self {
        let mut r = StratificationReport::default();
        for p in pairs {
            let b = p.conj_word.bucket();
            *r.per_bucket.entry(b).or_default() += 1;
            r.total += 1;
            if let Some(l) = p.label {
                *r.counts.entry(b).or_default().entry(l).or_default() += 1;
                *r.per_label.entry(l).or_default() += 1;
            }
        }
        r
    }
}

#[derive(Debug, Clone)]
pub struct AdversarialSet {
    pub pairs: Vec<NliPair>,
    pub report: StratificationReport,
}

/// Samples `target_size / 3` labeled pairs from each of the and/or/but
/// buckets ("nor" counts as "or"). Each bucket is shuffled once under the
/// seed and its prefix taken, so sets built with the same seed and growing
/// sizes are nested.
pub fn build_adversarial_set(
    pairs: &[NliPair],
    config: &HeuristicConfig,
    target_size: usize,
    seed: u64,
) -> Result<AdversarialSet, LabelError> {
    config.validate()?;
    if target_size == 0 || !target_size.is_multiple_of(3) {
        return Err(LabelError::BadSize(target_size));
    }
    let per = target_size / 3;
    let mut buckets: BTreeMap<ConjBucket, Vec<NliPair>> = BTreeMap::new();
    for p in pairs {
        let mut p = p.clone();
        if p.label.is_none() {
            let l = label_pair(&p, config);
            p.set_label(l, LabelSource::Heuristic);
        }
        buckets.entry(p.conj_word.bucket()).or_default().push(p);
    }
    let mut out = Vec::with_capacity(target_size);
    for (i, bucket) in ConjBucket::ALL.into_iter().enumerate() {
        let mut items = buckets.remove(&bucket).unwrap_or_default();
        if items.len() < per {
            return Err(LabelError::Insufficient { bucket, needed: per, available: items.len() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        items.shuffle(&mut rng);
        items.truncate(per);
        out.extend(items);
    }
    let report = StratificationReport::of(&out);
    Ok(AdversarialSet { pairs: out, report })
}
