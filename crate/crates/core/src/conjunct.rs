//! Coordination finding over constituency trees and sentence-level
//! conjunction/quantifier/negation features.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;
use crate::treebank::{base_label, ParseNode, Sentence};
use crate::types::{ConjWord, Span};

const PUNCT_LABELS: &[&str] = &[",", ".", ":"];
const CLAUSE_LABELS: &[&str] = &["S", "SBAR"];
/// Tokens that mark a coordination as negated when they precede it in its clause.
const SCOPE_NEGATORS: &[&str] = &["not", "n't", "no", "never", "none", "nor"];

/// How `in_named_entity` was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntitySource {
    /// Explicit NER tags were supplied.
    Ner,
    /// Capitalization and proper-noun heuristic.
    Capitalization,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinationInstance {
    pub conj_word: ConjWord,
    pub conj_index: usize,
    pub left_conjunct: Span,
    pub right_conjunct: Span,
    pub left_label: String,
    pub right_label: String,
    pub parent_label: String,
    pub negated: bool,
    pub in_named_entity: bool,
    pub entity_source: EntitySource,
    /// Always `"smallest-clause"`: negation is scoped to the smallest S/SBAR ancestor.
    pub negation_scope: String,
}

impl CoordinationInstance {
    pub fn conjunct(&self, side: crate::types::Side) -> Span {
        match side {
            crate::types::Side::Left => self.left_conjunct,
            crate::types::Side::Right => self.right_conjunct,
        }
    }
}

/// A CC that could not be turned into an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinationWarning {
    pub conj_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Coordinations {
    pub instances: Vec<CoordinationInstance>,
    pub warnings: Vec<CoordinationWarning>,
}

#[derive(Debug, Error)]
pub enum ConjunctError {
    #[error("tree yield does not match sentence tokens at index {index}")]
    YieldMismatch { index: usize },
    #[error("NER has {ner} tags for {tokens} tokens")]
    NerLength { ner: usize, tokens: usize },
}

fn is_punct(node: &ParseNode) -> bool {
    PUNCT_LABELS.contains(&node.base_label())
}

fn is_clause(node: &ParseNode) -> bool {
    CLAUSE_LABELS.contains(&node.base_label())
}

/// Head POS of a conjunct: the label itself for a leaf, otherwise the head of
/// the rightmost nominal child, falling back to the last child.
fn head_category(node: &ParseNode) -> &str {
    if node.is_leaf() {
        return node.base_label();
    }
    let nominal = node.children.iter().rev().find(|c| c.base_label().starts_with("NN") || c.base_label() == "NP");
    head_category(nominal.unwrap_or_else(|| node.children.last().unwrap()))
}

fn is_title_case(tok: &str) -> bool {
    tok.chars().next().is_some_and(char::is_uppercase)
}

/// BIO mention containing `index`, as a span.
fn mention_at(ner: &[String], index: usize) -> Option<Span> {
    let tag = ner.get(index)?;
    let ty = tag.strip_prefix("B-").or_else(|| tag.strip_prefix("I-"))?;
    let mut start = index;
    while !ner[start].starts_with("B-") && start > 0 && ner[start - 1].get(2..) == Some(ty) {
        start -= 1;
    }
    let mut end = index + 1;
    while end < ner.len() && ner[end] == format!("I-{ty}") {
        end += 1;
    }
    Some(Span::new(start, end))
}

fn in_named_entity(
    sentence: &Sentence,
    parent: &ParseNode,
    left: &ParseNode,
    right: &ParseNode,
) -> (bool, EntitySource) {
    if let Some(ner) = &sentence.ner {
        let hit =
            mention_at(ner, left.span.start).is_some_and(|m| m.start <= left.span.start && right.span.end <= m.end);
        return (hit, EntitySource::Ner);
    }
    if parent.base_label() != "NP" {
        return (false, EntitySource::Capitalization);
    }
    let tokens = left.yield_tokens().into_iter().chain(right.yield_tokens());
    let all_title = tokens.filter(|t| t.chars().any(char::is_alphabetic)).all(|t| is_title_case(&t));
    let proper = |n: &ParseNode| matches!(head_category(n), "NNP" | "NNPS");
    (all_title && proper(left) && proper(right), EntitySource::Capitalization)
}

/// Finds every coordination in `tree`.
///
/// Conjuncts are the nearest non-punctuation siblings on either side of the
/// CC; with more than two conjuncts only the two adjacent ones are taken.
pub fn find_coordinations(tree: &ParseNode, sentence: &Sentence) -> Result<Coordinations, ConjunctError> {
    let yielded = tree.yield_tokens();
    if yielded.len() != sentence.tokens.len() {
        return Err(ConjunctError::YieldMismatch { index: yielded.len().min(sentence.tokens.len()) });
    }
    if let Some(i) = yielded.iter().zip(&sentence.tokens).position(|(a, b)| a != b) {
        return Err(ConjunctError::YieldMismatch { index: i });
    }
    if let Some(ner) = &sentence.ner {
        if ner.len() != sentence.tokens.len() {
            return Err(ConjunctError::NerLength { ner: ner.len(), tokens: sentence.tokens.len() });
        }
    }

    let mut out = Coordinations::default();
    tree.visit_with_ancestors(&mut |node, ancestors| {
        if node.is_leaf() {
            return;
        }
        for (ci, child) in node.children.iter().enumerate() {
            if !child.is_leaf() || base_label(&child.label) != "CC" {
                continue;
            }
            let Some(conj_word) = child.token.as_deref().and_then(ConjWord::from_token) else {
                continue;
            };
            let conj_index = child.span.start;
            let left = node.children[..ci].iter().rev().find(|c| !is_punct(c));
            let right = node.children[ci + 1..].iter().find(|c| !is_punct(c));
            let (Some(left), Some(right)) = (left, right) else {
                out.warnings.push(CoordinationWarning {
                    conj_index,
                    message: format!(
                        "'{}' at {conj_index} lacks a {} conjunct",
                        conj_word,
                        if left.is_none() { "left" } else { "right" }
                    ),
                });
                continue;
            };

            let clause =
                std::iter::once(node).chain(ancestors.iter().rev().copied()).find(|a| is_clause(a)).unwrap_or(tree);
            let negated = (clause.span.start..conj_index)
                .any(|i| SCOPE_NEGATORS.contains(&sentence.tokens[i].to_lowercase().as_str()));
            let (in_ne, entity_source) = in_named_entity(sentence, node, left, right);

            out.instances.push(CoordinationInstance {
                conj_word,
                conj_index,
                left_conjunct: left.span,
                right_conjunct: right.span,
                left_label: left.label.clone(),
                right_label: right.label.clone(),
                parent_label: node.label.clone(),
                negated,
                in_named_entity: in_ne,
                entity_source,
                negation_scope: "smallest-clause".to_string(),
            });
        }
    });
    out.instances.sort_by_key(|c| c.conj_index);
    Ok(out)
}

/// Word lists backing [`detect_features`]; overridable from a JSON file with
/// keys `quantifiers` and `negations`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLexicons {
    pub quantifiers: HashSet<String>,
    pub negations: HashSet<String>,
}

impl Default for FeatureLexicons {
    fn default() -> Self {
        let set = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect();
        FeatureLexicons {
            quantifiers: set(&[
                "all", "every", "each", "some", "any", "most", "few", "many", "several", "both", "no", "none", "total",
            ]),
            negations: set(&["not", "n't", "no", "never", "none", "nor", "neither"]),
        }
    }
}

impl FeatureLexicons {
    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let raw = fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(std::io::Error::other)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceFeatures {
    pub conjunction_count: usize,
    pub has_quantifier: bool,
    pub has_negation: bool,
    pub conjunction_types: BTreeSet<ConjWord>,
}

impl SentenceFeatures {
    pub fn is_multiple(&self) -> bool {
        self.conjunction_count >= 2
    }
}

pub fn detect_features(sentence: &Sentence, lex: &FeatureLexicons) -> SentenceFeatures {
    features_of_tokens(sentence.tokens.iter().map(String::as_str), lex)
}

/// Same as [`detect_features`] for raw, untokenized text.
pub fn detect_text_features(text_: &str, lex: &FeatureLexicons) -> SentenceFeatures {
    let toks = text::tokenize(text_);
    features_of_tokens(toks.iter().map(String::as_str), lex)
}

fn features_of_tokens<'a>(tokens: impl Iterator<Item = &'a str>, lex: &FeatureLexicons) -> SentenceFeatures {
    let mut f = SentenceFeatures::default();
    for tok in tokens {
        let lower = tok.to_lowercase();
        if let Some(c) = ConjWord::from_token(&lower) {
            f.conjunction_count += 1;
            f.conjunction_types.insert(c);
        }
        f.has_quantifier |= lex.quantifiers.contains(&lower);
        f.has_negation |= lex.negations.contains(&lower);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;
    use crate::types::Side;

    fn run(bracketed: &str) -> (Sentence, Coordinations) {
        let tree = parse_bracketed(bracketed).unwrap();
        let s = Sentence::from_tree(&tree, "t");
        let c = find_coordinations(&tree, &s).unwrap();
        (s, c)
    }

    fn words(s: &Sentence, span: Span) -> String {
        s.tokens[span.range()].join(" ")
    }

    const WORCESTER: &str = "(S (NP (PRP He)) (VP (VBZ is) (NP (NP (DT a) (NNP Worcester) (NN resident)) (CC and) (NP (NP (DT a) (NN member)) (PP (IN of) (NP (DT the) (NNP Democratic) (NNP Party)))))) (. .))";

    #[test]
    fn worcester_conjuncts() {
        let (s, c) = run(WORCESTER);
        assert_eq!(c.instances.len(), 1);
        let inst = &c.instances[0];
        assert_eq!(inst.conj_word, ConjWord::And);
        assert_eq!(words(&s, inst.left_conjunct), "a Worcester resident");
        assert_eq!(words(&s, inst.right_conjunct), "a member of the Democratic Party");
        assert!(!inst.negated);
        assert!(!inst.in_named_entity);
        assert_eq!(inst.parent_label, "NP");
        assert_eq!(inst.conjunct(Side::Left), inst.left_conjunct);
    }

    #[test]
    fn named_entity_from_ner_tags() {
        let tree = parse_bracketed(
            "(S (NP (NNP Franklin) (CC and) (NNP Marshall) (NNP College)) (VP (VBZ is) (ADJP (JJ old))) (. .))",
        )
        .unwrap();
        let s = Sentence::from_tree(&tree, "t")
            .with_ner(["B-ORG", "I-ORG", "I-ORG", "I-ORG", "O", "O", "O"].map(String::from).to_vec());
        let c = find_coordinations(&tree, &s).unwrap();
        assert_eq!(c.instances.len(), 1);
        assert!(c.instances[0].in_named_entity);
        assert_eq!(c.instances[0].entity_source, EntitySource::Ner);
        assert_eq!(words(&s, c.instances[0].right_conjunct), "Marshall");

        // NER saying otherwise wins over capitalization.
        let s2 = s.clone().with_ner(vec![
            "B-PER".into(),
            "O".into(),
            "B-ORG".into(),
            "I-ORG".into(),
            "O".into(),
            "O".into(),
            "O".into(),
        ]);
        assert!(!find_coordinations(&tree, &s2).unwrap().instances[0].in_named_entity);
    }

    #[test]
    fn named_entity_capitalization_fallback() {
        let (_, c) =
            run("(S (NP (NNP Franklin) (CC and) (NNP Marshall) (NNP College)) (VP (VBZ is) (ADJP (JJ old))) (. .))");
        assert!(c.instances[0].in_named_entity);
        assert_eq!(c.instances[0].entity_source, EntitySource::Capitalization);
        let (_, c) = run("(S (NP (NNS cats) (CC and) (NNS dogs)) (VP (VBP sleep)))");
        assert!(!c.instances[0].in_named_entity);
    }

    #[test]
    fn negated_or() {
        let (s, c) = run("(S (NP (NP (DT All) (NNS devices)) (SBAR (S (NP (PRP they)) (VP (VBD tested))))) (VP (VBD did) (RB not) (VP (VB produce) (NP (NN gravity) (CC or) (NN anti-gravity)))) (. .))");
        assert_eq!(c.instances.len(), 1);
        let inst = &c.instances[0];
        assert_eq!(inst.conj_word, ConjWord::Or);
        assert!(inst.negated);
        assert_eq!(words(&s, inst.right_conjunct), "anti-gravity");
    }

    #[test]
    fn negation_outside_clause_ignored() {
        // "not" sits in a different clause from the coordination.
        let (_, c) = run("(S (S (NP (PRP He)) (VP (VBD did) (RB not) (VP (VB go)))) (, ,) (CC but) (S (NP (PRP she)) (VP (VBD ate) (NP (NN bread) (CC and) (NN jam)))))");
        let and = c.instances.iter().find(|i| i.conj_word == ConjWord::And).unwrap();
        assert!(!and.negated);
        let but = c.instances.iter().find(|i| i.conj_word == ConjWord::But).unwrap();
        assert!(but.negated, "outer clause contains the 'not'");
    }

    #[test]
    fn three_conjuncts_take_adjacent_pair() {
        let (s, c) =
            run("(S (NP (NP (NN apples)) (, ,) (NP (NN pears)) (, ,) (CC and) (NP (NN plums))) (VP (VBP grow)))");
        assert_eq!(c.instances.len(), 1);
        let inst = &c.instances[0];
        assert_eq!(words(&s, inst.left_conjunct), "pears");
        assert_eq!(words(&s, inst.right_conjunct), "plums");
        assert!(inst.left_conjunct.end <= inst.conj_index && inst.conj_index < inst.right_conjunct.start);
    }

    #[test]
    fn dangling_cc_is_a_warning() {
        let (_, c) = run("(S (CC But) (NP (PRP he)) (VP (VBD left)) (. .))");
        assert!(c.instances.is_empty());
        assert_eq!(c.warnings.len(), 1);
        assert_eq!(c.warnings[0].conj_index, 0);
    }

    #[test]
    fn yield_mismatch_is_an_error() {
        let tree = parse_bracketed("(S (NN a) (CC and) (NN b))").unwrap();
        let s = Sentence::new(vec!["a".into(), "or".into(), "b".into()], "x");
        assert!(matches!(find_coordinations(&tree, &s), Err(ConjunctError::YieldMismatch { index: 1 })));
    }

    #[test]
    fn deterministic() {
        let (_, a) = run(WORCESTER);
        let (_, b) = run(WORCESTER);
        assert_eq!(a, b);
    }

    #[test]
    fn features_fowler() {
        let lex = FeatureLexicons::default();
        let f = detect_text_features("Fowler wrote or co-wrote all but one of the songs on album .", &lex);
        assert_eq!(f.conjunction_count, 2);
        assert_eq!(f.conjunction_types, [ConjWord::Or, ConjWord::But].into_iter().collect());
        assert!(f.has_quantifier);
        assert!(!f.has_negation);
        assert!(f.is_multiple());
    }

    #[test]
    fn features_empty_case() {
        let f = detect_text_features("He slept .", &FeatureLexicons::default());
        assert_eq!(f, SentenceFeatures::default());
    }
}
