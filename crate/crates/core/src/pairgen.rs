//! NLI pair creation by editing one conjunct: removal, addition (the swapped
//! removal), replacement, and the "either ... or" probe rewrite.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conjunct::{
    detect_features, find_coordinations, ConjunctError, CoordinationInstance, FeatureLexicons, SentenceFeatures,
};
use crate::text::detokenize_with_offsets;
use crate::treebank::{ParseNode, Sentence, TreeRecord};
use crate::types::{ConjWord, Label, LabelSource, Operation, ReplacementKind, Side, Span};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFlags {
    pub negated: bool,
    pub in_named_entity: bool,
    pub conjunction_count: usize,
    pub has_quantifier: bool,
    pub has_negation: bool,
    pub conjunction_types: BTreeSet<ConjWord>,
}

impl PairFlags {
    pub fn new(coord: &CoordinationInstance, features: &SentenceFeatures) -> Self {
        PairFlags {
            negated: coord.negated,
            in_named_entity: coord.in_named_entity,
            conjunction_count: features.conjunction_count,
            has_quantifier: features.has_quantifier,
            has_negation: features.has_negation,
            conjunction_types: features.conjunction_types.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextSide {
    Premise,
    Hypothesis,
}

/// Byte ranges of the two conjuncts and the conjunction in the full sentence
/// (the premise for Remove/Replace, the hypothesis for Add).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjunctSpans {
    pub text: TextSide,
    pub left: Span,
    pub conj: Span,
    pub right: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
    pub operation: Operation,
    pub conj_word: ConjWord,
    pub removed_or_replaced_side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_kind: Option<ReplacementKind>,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub label_source: LabelSource,
    pub source_id: String,
    #[serde(default)]
    pub flags: PairFlags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<ConjunctSpans>,
}

impl NliPair {
    pub fn set_label(&mut self, label: Label, source: LabelSource) {
        self.label = Some(label);
        self.label_source = source;
    }

    pub fn clear_label(&mut self) {
        self.label = None;
        self.label_source = LabelSource::None;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementLexicon {
    #[serde(default)]
    pub antonyms: BTreeMap<String, String>,
    #[serde(default)]
    pub co_hyponyms: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub name_pool: Vec<String>,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("antonym entry maps {0:?} to itself")]
    SelfAntonym(String),
    #[error("co-hyponym entry for {0:?} contains itself")]
    SelfCoHyponym(String),
    #[error("name_pool entry {0} is empty")]
    EmptyName(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ReplacementLexicon {
    pub fn validate(&self) -> Result<(), LexiconError> {
        if let Some((k, _)) = self.antonyms.iter().find(|(k, v)| k == v) {
            return Err(LexiconError::SelfAntonym(k.clone()));
        }
        if let Some((k, _)) = self.co_hyponyms.iter().find(|(k, vs)| vs.contains(k)) {
            return Err(LexiconError::SelfCoHyponym(k.clone()));
        }
        if let Some(i) = self.name_pool.iter().position(|n| n.trim().is_empty()) {
            return Err(LexiconError::EmptyName(i));
        }
        Ok(())
    }

    pub fn from_json(raw: &str) -> Result<Self, LexiconError> {
        let lex: ReplacementLexicon = serde_json::from_str(raw)?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Error)]
pub enum PairgenError {
    #[error("removing the {0:?} conjunct leaves an empty sentence")]
    EmptyHypothesis(Side),
    #[error("no-replacement: no replaceable token in either conjunct")]
    NoReplacement,
    #[error("name replacement needs at least two names in name_pool, found {0}")]
    NamePoolTooSmall(usize),
    #[error("expected a {expected:?} pair, got {found:?}")]
    WrongOperation { expected: Operation, found: Operation },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("hypothesis identical to premise")]
    Unchanged,
    #[error(transparent)]
    Conjunct(#[from] ConjunctError),
}

fn byte_span(ranges: &[std::ops::Range<usize>], tokens: Span) -> Span {
    Span::new(ranges[tokens.start].start, ranges[tokens.end - 1].end)
}

fn premise_spans(sentence: &Sentence, coord: &CoordinationInstance) -> (String, ConjunctSpans) {
    let (text, ranges) = detokenize_with_offsets(&sentence.tokens);
    let spans = ConjunctSpans {
        text: TextSide::Premise,
        left: byte_span(&ranges, coord.left_conjunct),
        conj: byte_span(&ranges, Span::new(coord.conj_index, coord.conj_index + 1)),
        right: byte_span(&ranges, coord.right_conjunct),
    };
    (text, spans)
}

fn check_coord(sentence: &Sentence, coord: &CoordinationInstance) -> Result<(), PairgenError> {
    let n = sentence.tokens.len();
    let ok = !coord.left_conjunct.is_empty()
        && !coord.right_conjunct.is_empty()
        && coord.left_conjunct.end <= coord.conj_index
        && coord.conj_index < coord.right_conjunct.start
        && coord.right_conjunct.end <= n
        && ConjWord::from_token(&sentence.tokens[coord.conj_index]) == Some(coord.conj_word);
    if ok {
        Ok(())
    } else {
        Err(PairgenError::Precondition("coordination does not fit the sentence".into()))
    }
}

fn is_comma(t: &str) -> bool {
    t == ","
}

fn is_closing_punct(t: &str) -> bool {
    matches!(t, "." | ":" | ";" | "!" | "?")
}

/// Deletes the marked tokens, then drops commas next to the deleted region
/// that end up dangling: sentence-initial, doubled, or right before closing
/// punctuation.
fn delete_tokens(tokens: &[String], delete: &[bool]) -> Vec<String> {
    let mut kept: Vec<(String, bool)> = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        if delete[i] {
            continue;
        }
        let touched = (i > 0 && delete[i - 1]) || (i + 1 < tokens.len() && delete[i + 1]);
        kept.push((tok.clone(), touched));
    }
    loop {
        let n = kept.len();
        let drop = (0..n).find(|&i| {
            let (tok, touched) = &kept[i];
            if !*touched || !is_comma(tok) {
                return false;
            }
            let at_start = i == 0;
            let before_closing = kept.get(i + 1).is_none_or(|(t, _)| is_closing_punct(t) || is_comma(t));
            let after_comma = i > 0 && is_comma(&kept[i - 1].0);
            at_start || before_closing || after_comma
        });
        match drop {
            Some(i) => {
                kept.remove(i);
                if let Some(next) = kept.get_mut(i) {
                    next.1 = true;
                }
            }
            None => break,
        }
    }
    kept.into_iter().map(|(t, _)| t).collect()
}

fn base_pair(
    sentence: &Sentence,
    coord: &CoordinationInstance,
    features: &SentenceFeatures,
    operation: Operation,
    side: Side,
    hypothesis: String,
) -> NliPair {
    let (premise, spans) = premise_spans(sentence, coord);
    NliPair {
        premise,
        hypothesis,
        operation,
        conj_word: coord.conj_word,
        removed_or_replaced_side: side,
        replacement_kind: None,
        label: None,
        label_source: LabelSource::None,
        source_id: sentence.source_id.clone(),
        flags: PairFlags::new(coord, features),
        spans: Some(spans),
    }
}

/// Deletes one conjunct together with the conjunction.
pub fn remove_conjunct(sentence: &Sentence, coord: &CoordinationInstance, side: Side) -> Result<NliPair, PairgenError> {
    let features = detect_features(sentence, &FeatureLexicons::default());
    remove_with_features(sentence, coord, side, &features)
}

fn remove_with_features(
    sentence: &Sentence,
    coord: &CoordinationInstance,
    side: Side,
    features: &SentenceFeatures,
) -> Result<NliPair, PairgenError> {
    check_coord(sentence, coord)?;
    let mut delete = vec![false; sentence.tokens.len()];
    for i in coord.conjunct(side).range() {
        delete[i] = true;
    }
    delete[coord.conj_index] = true;
    let remaining = delete_tokens(&sentence.tokens, &delete);
    if remaining.iter().all(|t| t.chars().all(|c| c.is_ascii_punctuation())) {
        return Err(PairgenError::EmptyHypothesis(side));
    }
    let hypothesis = crate::text::detokenize_tokens(&remaining);
    Ok(base_pair(sentence, coord, features, Operation::Remove, side, hypothesis))
}

/// The addition pair: premise and hypothesis of a removal swapped.
pub fn add_conjunct(pair: &NliPair) -> Result<NliPair, PairgenError> {
    if pair.operation != Operation::Remove {
        return Err(PairgenError::WrongOperation { expected: Operation::Remove, found: pair.operation });
    }
    let mut out = pair.clone();
    std::mem::swap(&mut out.premise, &mut out.hypothesis);
    out.operation = Operation::Add;
    out.clear_label();
    if let Some(s) = &mut out.spans {
        s.text = TextSide::Hypothesis;
    }
    Ok(out)
}

/// Inverse of [`add_conjunct`].
pub fn undo_add(pair: &NliPair) -> Result<NliPair, PairgenError> {
    if pair.operation != Operation::Add {
        return Err(PairgenError::WrongOperation { expected: Operation::Add, found: pair.operation });
    }
    let mut out = pair.clone();
    std::mem::swap(&mut out.premise, &mut out.hypothesis);
    out.operation = Operation::Remove;
    if let Some(s) = &mut out.spans {
        s.text = TextSide::Premise;
    }
    Ok(out)
}

/// Adds one to a digit string, keeping comma grouping when present:
/// `"27"` -> `"28"`, `"1,999"` -> `"2,000"`.
pub fn increment_number(tok: &str) -> Option<String> {
    let grouped = tok.contains(',');
    if grouped {
        let mut groups = tok.split(',');
        let first = groups.next()?;
        if first.is_empty() || first.len() > 3 || !first.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !groups.all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit())) {
            return None;
        }
    } else if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut digits: Vec<u8> = tok.bytes().filter(u8::is_ascii_digit).map(|b| b - b'0').collect();
    let mut i = digits.len();
    loop {
        if i == 0 {
            digits.insert(0, 1);
            break;
        }
        i -= 1;
        if digits[i] == 9 {
            digits[i] = 0;
        } else {
            digits[i] += 1;
            break;
        }
    }
    let plain: String = digits.iter().map(|d| (b'0' + d) as char).collect();
    if !grouped {
        return Some(plain);
    }
    let mut out = String::new();
    for (k, c) in plain.chars().enumerate() {
        if k > 0 && (plain.len() - k).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    Some(out)
}

fn is_person_tag(tag: &str) -> bool {
    matches!(tag, "B-PER" | "I-PER" | "B-PERSON" | "I-PERSON")
}

fn transfer_case(template: &str, word: &str) -> String {
    if template.chars().next().is_some_and(char::is_uppercase) {
        let mut c = word.chars();
        match c.next() {
            Some(f) => f.to_uppercase().chain(c).collect(),
            None => String::new(),
        }
    } else {
        word.to_string()
    }
}

struct Replacement {
    region: Span,
    with: String,
    kind: ReplacementKind,
    side: Side,
}

fn find_replacement(
    sentence: &Sentence,
    coord: &CoordinationInstance,
    lex: &ReplacementLexicon,
    rng: &mut ChaCha8Rng,
) -> Result<Replacement, PairgenError> {
    let toks = &sentence.tokens;
    let positions: Vec<(usize, Side)> = coord
        .left_conjunct
        .range()
        .map(|i| (i, Side::Left))
        .chain(coord.right_conjunct.range().map(|i| (i, Side::Right)))
        .collect();

    for &(i, side) in &positions {
        if let Some(next) = increment_number(&toks[i]) {
            return Ok(Replacement { region: Span::new(i, i + 1), with: next, kind: ReplacementKind::Number, side });
        }
    }

    for &(i, side) in &positions {
        let conjunct = coord.conjunct(side);
        let region = if let Some(ner) = sentence.ner.as_ref().filter(|n| is_person_tag(&n[i])) {
            // Whole PER mention, clipped to the conjunct.
            let mut end = i + 1;
            while end < conjunct.end && ner[end].starts_with("I-") && is_person_tag(&ner[end]) {
                end += 1;
            }
            Some(Span::new(i, end))
        } else {
            lex.name_pool.iter().find_map(|name| {
                let parts: Vec<&str> = name.split_whitespace().collect();
                let end = i + parts.len();
                (end <= conjunct.end && toks[i..end].iter().zip(&parts).all(|(a, b)| a == b)).then(|| Span::new(i, end))
            })
        };
        if let Some(region) = region {
            let current = toks[region.range()].join(" ");
            let candidates: Vec<&String> = lex.name_pool.iter().filter(|n| **n != current).collect();
            if lex.name_pool.len() < 2 || candidates.is_empty() {
                return Err(PairgenError::NamePoolTooSmall(lex.name_pool.len()));
            }
            let pick = candidates[rng.gen_range(0..candidates.len())].clone();
            return Ok(Replacement { region, with: pick, kind: ReplacementKind::Name, side });
        }
    }

    for &(i, side) in &positions {
        let tok = &toks[i];
        let hit = lex
            .antonyms
            .get(tok)
            .cloned()
            .or_else(|| lex.antonyms.get(&tok.to_lowercase()).map(|a| transfer_case(tok, a)));
        if let Some(with) = hit {
            return Ok(Replacement { region: Span::new(i, i + 1), with, kind: ReplacementKind::Antonym, side });
        }
    }

    for &(i, side) in &positions {
        let tok = &toks[i];
        let list = lex
            .co_hyponyms
            .get(tok)
            .map(|l| (l, false))
            .or_else(|| lex.co_hyponyms.get(&tok.to_lowercase()).map(|l| (l, true)));
        if let Some((list, recase)) = list {
            let options: Vec<&String> = list.iter().filter(|w| !w.eq_ignore_ascii_case(tok)).collect();
            if let Some(w) = options.choose(rng) {
                let with = if recase { transfer_case(tok, w) } else { (*w).clone() };
                return Ok(Replacement { region: Span::new(i, i + 1), with, kind: ReplacementKind::CoHyponym, side });
            }
        }
    }
    Err(PairgenError::NoReplacement)
}

/// Replaces one token (or one person-name mention) inside a conjunct.
/// Candidates are tried by kind, number > name > antonym > co-hyponym,
/// scanning the left conjunct before the right one.
pub fn replace_conjunct(
    sentence: &Sentence,
    coord: &CoordinationInstance,
    lex: &ReplacementLexicon,
    rng_seed: u64,
) -> Result<NliPair, PairgenError> {
    let features = detect_features(sentence, &FeatureLexicons::default());
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    replace_with(sentence, coord, lex, &mut rng, &features)
}

fn replace_with(
    sentence: &Sentence,
    coord: &CoordinationInstance,
    lex: &ReplacementLexicon,
    rng: &mut ChaCha8Rng,
    features: &SentenceFeatures,
) -> Result<NliPair, PairgenError> {
    check_coord(sentence, coord)?;
    let rep = find_replacement(sentence, coord, lex, rng)?;
    let mut toks: Vec<String> = sentence.tokens[..rep.region.start].to_vec();
    toks.extend(rep.with.split_whitespace().map(str::to_string));
    toks.extend_from_slice(&sentence.tokens[rep.region.end..]);
    let hypothesis = crate::text::detokenize_tokens(&toks);
    let mut pair = base_pair(sentence, coord, features, Operation::Replace, rep.side, hypothesis);
    if pair.hypothesis == pair.premise {
        return Err(PairgenError::Unchanged);
    }
    pair.replacement_kind = Some(rep.kind);
    Ok(pair)
}

/// Rewrites an entailed "and" removal into "either L or R" with a neutral
/// label, keeping the hypothesis.
pub fn either_or_probe(pair: &NliPair) -> Result<NliPair, PairgenError> {
    if pair.operation != Operation::Remove {
        return Err(PairgenError::WrongOperation { expected: Operation::Remove, found: pair.operation });
    }
    if pair.conj_word != ConjWord::And {
        return Err(PairgenError::Precondition(format!("probe needs an 'and' pair, got '{}'", pair.conj_word)));
    }
    if pair.label != Some(Label::Entailment) {
        return Err(PairgenError::Precondition("probe needs an entailment-labeled pair".into()));
    }
    let spans = pair
        .spans
        .filter(|s| s.text == TextSide::Premise)
        .ok_or_else(|| PairgenError::Precondition("pair has no conjunct spans".into()))?;
    let p = &pair.premise;
    let either = if spans.left.start == 0 { "Either " } else { "either " };
    let mut premise = String::with_capacity(p.len() + 8);
    premise.push_str(&p[..spans.left.start]);
    premise.push_str(either);
    premise.push_str(&p[spans.left.start..spans.conj.start]);
    premise.push_str("or");
    premise.push_str(&p[spans.conj.end..]);

    let shift = either.len();
    let conj_start = spans.conj.start + shift;
    let delta = shift as isize + 2 - spans.conj.len() as isize;
    let moved = |s: Span| Span::new((s.start as isize + delta) as usize, (s.end as isize + delta) as usize);
    let mut out = pair.clone();
    out.premise = premise;
    out.operation = Operation::EitherOrProbe;
    out.conj_word = ConjWord::Or;
    out.set_label(Label::Neutral, LabelSource::Heuristic);
    out.spans = Some(ConjunctSpans {
        text: TextSide::Premise,
        left: Span::new(spans.left.start + shift, spans.left.end + shift),
        conj: Span::new(conj_start, conj_start + 2),
        right: moved(spans.right),
    });
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub seed: u64,
    #[serde(default)]
    pub features: FeatureLexicons,
}

impl GenerationConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenerationConfig { seed, features: FeatureLexicons::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationWarning {
    pub source_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Generated {
    pub pairs: Vec<NliPair>,
    pub warnings: Vec<GenerationWarning>,
}

/// Seed for one coordination's random stream, derived from the corpus seed
/// and the sentence id.
pub fn stream_seed(seed: u64, source_id: &str, instance: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(source_id.as_bytes());
    h.update((instance as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Runs every conjunct operation on every coordination of one sentence.
pub fn generate_pairs(
    sentence: &Sentence,
    tree: &ParseNode,
    lex: &ReplacementLexicon,
    config: &GenerationConfig,
) -> Result<Generated, PairgenError> {
    let coords = find_coordinations(tree, sentence)?;
    let features = detect_features(sentence, &config.features);
    let mut out = Generated::default();
    let warn = |out: &mut Generated, message: String| {
        out.warnings.push(GenerationWarning { source_id: sentence.source_id.clone(), message })
    };
    for w in coords.warnings {
        warn(&mut out, w.message);
    }
    for (k, coord) in coords.instances.iter().enumerate() {
        let mut removals = Vec::new();
        for side in [Side::Left, Side::Right] {
            match remove_with_features(sentence, coord, side, &features) {
                Ok(p) if p.hypothesis != p.premise => removals.push(p),
                Ok(_) => {}
                Err(e) => warn(&mut out, format!("conj {}: {e}", coord.conj_index)),
            }
        }
        let adds: Vec<NliPair> = removals.iter().filter_map(|p| add_conjunct(p).ok()).collect();
        out.pairs.extend(removals);
        out.pairs.extend(adds);
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, &sentence.source_id, k));
        match replace_with(sentence, coord, lex, &mut rng, &features) {
            Ok(p) => out.pairs.push(p),
            Err(PairgenError::NoReplacement) => {}
            Err(e) => warn(&mut out, format!("conj {}: {e}", coord.conj_index)),
        }
    }
    Ok(out)
}

/// [`generate_pairs`] over a whole treebank; per-sentence failures become
/// warnings.
pub fn generate_corpus(records: &[TreeRecord], lex: &ReplacementLexicon, config: &GenerationConfig) -> Generated {
    let mut out = Generated::default();
    for rec in records {
        match generate_pairs(&rec.sentence, &rec.tree, lex, config) {
            Ok(g) => {
                out.pairs.extend(g.pairs);
                out.warnings.extend(g.warnings);
            }
            Err(e) => out
                .warnings
                .push(GenerationWarning { source_id: rec.sentence.source_id.clone(), message: e.to_string() }),
        }
    }
    out
}
