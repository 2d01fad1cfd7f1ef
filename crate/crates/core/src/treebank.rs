//! Penn-Treebank style bracketed constituency parses.
//!
//! A tree is read from a single line such as
//! `(S (NP (PRP He)) (VP (VBZ is) (NP (DT a) (NN resident))) (. .))`.
//! Pre-terminals like `(DT a)` become leaves carrying both the POS label and
//! the token. Token indices are assigned left to right from 0.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseNode {
    pub label: String,
    pub children: Vec<ParseNode>,
    pub token: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    /// A `(` was never closed.
    Unclosed,
    /// A `)` with no open bracket, or text outside any bracket.
    UnexpectedClose,
    EmptyLabel,
    /// A node that mixes a bare token with children, or holds several bare tokens.
    MixedLeaf,
    /// A node with neither token nor children, e.g. `(NP )`.
    EmptyNode,
    /// Content after the first complete tree.
    TrailingInput,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::Empty => "empty input",
            ParseErrorKind::Unclosed => "unbalanced parentheses: unclosed bracket",
            ParseErrorKind::UnexpectedClose => "unbalanced parentheses: unexpected ')'",
            ParseErrorKind::EmptyLabel => "empty label",
            ParseErrorKind::MixedLeaf => "leaf with both token and children",
            ParseErrorKind::EmptyNode => "node without token or children",
            ParseErrorKind::TrailingInput => "trailing input after tree",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the input.
    pub offset: usize,
}

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error("line {line}: NER sequence has {ner} tags for {tokens} tokens")]
    NerLength { line: usize, ner: usize, tokens: usize },
    #[error("{trees} trees but {ner} NER lines")]
    NerLineCount { trees: usize, ner: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn unescape_token(tok: &str) -> String {
    match tok {
        "-LRB-" => "(".to_string(),
        "-RRB-" => ")".to_string(),
        _ => tok.to_string(),
    }
}

fn escape_token(tok: &str) -> &str {
    match tok {
        "(" => "-LRB-",
        ")" => "-RRB-",
        _ => tok,
    }
}

/// Label with any functional tag stripped: `NP-SBJ` -> `NP`. Labels that
/// start with `-` (`-NONE-`, `-LRB-`) are returned unchanged.
pub fn base_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(i) if i > 0 => &label[..i],
        _ => label,
    }
}

impl ParseNode {
    pub fn leaf(label: impl Into<String>, token: impl Into<String>, index: usize) -> Self {
        ParseNode {
            label: label.into(),
            children: Vec::new(),
            token: Some(token.into()),
            span: Span::new(index, index + 1),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.token.is_some()
    }

    pub fn base_label(&self) -> &str {
        base_label(&self.label)
    }

    pub fn yield_tokens(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.span.len());
        self.collect_leaves(&mut |leaf| out.push(leaf.token.clone().unwrap_or_default()));
        out
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&ParseNode> {
        let mut out = Vec::new();
        self.walk_leaves(&mut out);
        out
    }

    fn walk_leaves<'a>(&'a self, out: &mut Vec<&'a ParseNode>) {
        if self.is_leaf() {
            out.push(self);
        } else {
            for c in &self.children {
                c.walk_leaves(out);
            }
        }
    }

    fn collect_leaves(&self, f: &mut dyn FnMut(&ParseNode)) {
        if self.is_leaf() {
            f(self);
        } else {
            for c in &self.children {
                c.collect_leaves(f);
            }
        }
    }

    /// Pre-order traversal handing each node its ancestor chain (root first).
    pub fn visit_with_ancestors<'a>(&'a self, f: &mut dyn FnMut(&'a ParseNode, &[&'a ParseNode])) {
        fn go<'a>(
            node: &'a ParseNode,
            stack: &mut Vec<&'a ParseNode>,
            f: &mut dyn FnMut(&'a ParseNode, &[&'a ParseNode]),
        ) {
            f(node, stack);
            stack.push(node);
            for c in &node.children {
                go(c, stack, f);
            }
            stack.pop();
        }
        let mut stack = Vec::new();
        go(self, &mut stack, f);
    }

    /// Checks the structural invariants; used by tests and after construction.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.label.is_empty() {
            return Err("empty label".into());
        }
        match (&self.token, self.children.is_empty()) {
            (Some(_), true) => {
                if self.span.end != self.span.start + 1 {
                    return Err(format!("leaf span {:?} is not unit length", self.span));
                }
                Ok(())
            }
            (None, false) => {
                let first = self.children.first().unwrap().span.start;
                let last = self.children.last().unwrap().span.end;
                if self.span != Span::new(first, last) {
                    return Err(format!("span {:?} does not cover children", self.span));
                }
                for w in self.children.windows(2) {
                    if w[0].span.end != w[1].span.start {
                        return Err("children not contiguous".into());
                    }
                }
                self.children.iter().try_for_each(|c| c.check_invariants())
            }
            _ => Err("leaf must have a token and no children".into()),
        }
    }

    /// Bracketed rendering with single spaces; inverse of [`parse_bracketed`].
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_bracketed(&mut out);
        out
    }

    fn write_bracketed(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        if let Some(tok) = &self.token {
            out.push(' ');
            out.push_str(escape_token(tok));
        }
        for c in &self.children {
            out.push(' ');
            c.write_bracketed(out);
        }
        out.push(')');
    }
}

impl fmt::Display for ParseNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

/// Collapses whitespace in a bracketed string to the canonical rendering:
/// single spaces between items, none inside brackets.
pub fn normalize_bracketed(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() && c != ')' && !out.ends_with('(') {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

#[derive(Debug)]
enum Tok<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str, usize),
}

fn lex(text: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                toks.push(Tok::Open(i));
                i += 1;
            }
            b')' => {
                toks.push(Tok::Close(i));
                i += 1;
            }
            b if (b as char).is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() {
                    let b = bytes[i];
                    if b == b'(' || b == b')' || (b as char).is_ascii_whitespace() {
                        break;
                    }
                    i += 1;
                }
                toks.push(Tok::Atom(&text[start..i], start));
            }
        }
    }
    toks
}

struct Parser<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
    next_index: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn err(kind: ParseErrorKind, offset: usize) -> ParseError {
        ParseError { kind, offset }
    }

    fn node(&mut self, open_at: usize) -> Result<ParseNode, ParseError> {
        // Label must directly follow '('.
        let label = match self.toks.get(self.pos) {
            Some(Tok::Atom(s, _)) => {
                self.pos += 1;
                s.to_string()
            }
            Some(Tok::Open(at)) | Some(Tok::Close(at)) => return Err(Self::err(ParseErrorKind::EmptyLabel, *at)),
            None => return Err(Self::err(ParseErrorKind::Unclosed, open_at)),
        };
        let mut token: Option<(String, usize)> = None;
        let mut children = Vec::new();
        loop {
            match self.toks.get(self.pos) {
                None => return Err(Self::err(ParseErrorKind::Unclosed, open_at)),
                Some(Tok::Close(at)) => {
                    let at = *at;
                    self.pos += 1;
                    return match (token, children.is_empty()) {
                        (Some((tok, _)), true) => {
                            let idx = self.next_index;
                            self.next_index += 1;
                            Ok(ParseNode::leaf(label, unescape_token(&tok), idx))
                        }
                        (None, false) => {
                            let span = Span::new(
                                children.first().map(|c: &ParseNode| c.span.start).unwrap(),
                                children.last().map(|c: &ParseNode| c.span.end).unwrap(),
                            );
                            Ok(ParseNode { label, children, token: None, span })
                        }
                        (None, true) => Err(Self::err(ParseErrorKind::EmptyNode, at)),
                        (Some((_, tok_at)), false) => Err(Self::err(ParseErrorKind::MixedLeaf, tok_at)),
                    };
                }
                Some(Tok::Atom(s, at)) => {
                    if token.is_some() || !children.is_empty() {
                        return Err(Self::err(ParseErrorKind::MixedLeaf, *at));
                    }
                    token = Some((s.to_string(), *at));
                    self.pos += 1;
                }
                Some(Tok::Open(at)) => {
                    let at = *at;
                    if let Some((_, tok_at)) = token {
                        return Err(Self::err(ParseErrorKind::MixedLeaf, tok_at));
                    }
                    self.pos += 1;
                    children.push(self.node(at)?);
                }
            }
        }
    }
}

/// Parses a single bracketed tree.
pub fn parse_bracketed(text: &str) -> Result<ParseNode, ParseError> {
    let toks = lex(text);
    let mut p = Parser { toks, pos: 0, next_index: 0, len: text.len() };
    let root = match p.toks.first() {
        None => return Err(Parser::err(ParseErrorKind::Empty, 0)),
        Some(Tok::Open(at)) => {
            let at = *at;
            p.pos = 1;
            p.node(at)?
        }
        Some(Tok::Close(at)) => return Err(Parser::err(ParseErrorKind::UnexpectedClose, *at)),
        Some(Tok::Atom(_, at)) => return Err(Parser::err(ParseErrorKind::UnexpectedClose, *at)),
    };
    if let Some(t) = p.toks.get(p.pos) {
        let (kind, at) = match t {
            Tok::Close(at) => (ParseErrorKind::UnexpectedClose, *at),
            Tok::Open(at) | Tok::Atom(_, at) => (ParseErrorKind::TrailingInput, *at),
        };
        return Err(Parser::err(kind, at.min(p.len)));
    }
    Ok(root)
}

pub fn yield_tokens(node: &ParseNode) -> Vec<String> {
    node.yield_tokens()
}

/// A tokenized sentence with optional per-token BIO named-entity tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ner: Option<Vec<String>>,
    pub source_id: String,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, source_id: impl Into<String>) -> Self {
        Sentence { tokens, ner: None, source_id: source_id.into() }
    }

    pub fn with_ner(mut self, ner: Vec<String>) -> Self {
        self.ner = Some(ner);
        self
    }

    pub fn from_tree(tree: &ParseNode, source_id: impl Into<String>) -> Self {
        Sentence::new(tree.yield_tokens(), source_id)
    }

    pub fn text(&self) -> String {
        crate::text::detokenize_tokens(&self.tokens)
    }
}

/// One parsed line of a `.trees` file.
#[derive(Debug, Clone)]
pub struct TreeRecord {
    pub tree: ParseNode,
    pub sentence: Sentence,
}

/// Parses `.trees` content; blank lines are skipped but still counted so
/// source ids match file line numbers.
pub fn parse_trees(content: &str, ner: Option<&str>, source: &str) -> Result<Vec<TreeRecord>, TreebankError> {
    let ner_lines: Option<Vec<&str>> = ner.map(|n| n.lines().collect());
    let mut out = Vec::new();
    let mut tree_count = 0;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        tree_count += 1;
        let line_no = i + 1;
        let tree = parse_bracketed(line).map_err(|source| TreebankError::Parse { line: line_no, source })?;
        let mut sentence = Sentence::from_tree(&tree, format!("{source}:{line_no}"));
        if let Some(lines) = &ner_lines {
            let tags: Vec<String> =
                lines.get(i).map(|l| l.split_whitespace().map(str::to_string).collect()).unwrap_or_default();
            if tags.len() != sentence.tokens.len() {
                return Err(TreebankError::NerLength { line: line_no, ner: tags.len(), tokens: sentence.tokens.len() });
            }
            sentence.ner = Some(tags);
        }
        out.push(TreeRecord { tree, sentence });
    }
    if let Some(lines) = &ner_lines {
        let non_blank = lines.iter().filter(|l| !l.trim().is_empty()).count();
        if non_blank != tree_count {
            return Err(TreebankError::NerLineCount { trees: tree_count, ner: non_blank });
        }
    }
    Ok(out)
}

/// Reads a `.trees` file and its optional `.ner` companion.
pub fn read_trees(path: &Path, ner_path: Option<&Path>) -> Result<Vec<TreeRecord>, TreebankError> {
    let content = fs::read_to_string(path)?;
    let ner = ner_path.map(fs::read_to_string).transpose()?;
    let source = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trees");
    parse_trees(&content, ner.as_deref(), source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_two_leaf_tree() {
        let t = parse_bracketed("(NP (DT a) (NN resident))").unwrap();
        assert_eq!(t.label, "NP");
        assert_eq!(t.children.len(), 2);
        assert!(t.children.iter().all(ParseNode::is_leaf));
        assert_eq!(t.span, Span::new(0, 2));
        assert_eq!(t.yield_tokens(), vec!["a", "resident"]);
    }

    #[test]
    fn single_leaf_round_trip() {
        let t = parse_bracketed("(X a)").unwrap();
        assert!(t.is_leaf());
        assert_eq!(t.to_bracketed(), "(X a)");
        assert_eq!(parse_bracketed("(NN dog)").unwrap().yield_tokens(), vec!["dog"]);
    }

    #[test]
    fn whitespace_tolerant_and_normalized() {
        let raw = "  ( S\n\t(NP (PRP He) )  (VP (VBD left)) )  ";
        let t = parse_bracketed(raw).unwrap();
        assert_eq!(t.to_bracketed(), normalize_bracketed(raw));
        assert_eq!(t.to_bracketed(), "(S (NP (PRP He)) (VP (VBD left)))");
    }

    #[test]
    fn bracket_tokens_are_unescaped() {
        let t = parse_bracketed("(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))").unwrap();
        assert_eq!(t.yield_tokens(), vec!["(", "x", ")"]);
        assert_eq!(t.to_bracketed(), "(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))");
        assert_eq!(t.children[0].base_label(), "-LRB-");
    }

    #[test]
    fn functional_tags_kept_but_stripped_for_matching() {
        let t = parse_bracketed("(S (NP-SBJ (PRP He)) (VP (VBD left)))").unwrap();
        assert_eq!(t.children[0].label, "NP-SBJ");
        assert_eq!(t.children[0].base_label(), "NP");
    }

    #[test]
    fn errors_carry_offsets() {
        let cases: &[(&str, ParseErrorKind, usize)] = &[
            ("", ParseErrorKind::Empty, 0),
            ("   ", ParseErrorKind::Empty, 0),
            ("(NP (DT a)", ParseErrorKind::Unclosed, 0),
            ("(NP (DT a)))", ParseErrorKind::UnexpectedClose, 11),
            ("((DT a))", ParseErrorKind::EmptyLabel, 1),
            ("(NP a (DT b))", ParseErrorKind::MixedLeaf, 4),
            ("(NP a b)", ParseErrorKind::MixedLeaf, 6),
            ("(NP )", ParseErrorKind::EmptyNode, 4),
            ("(X a) (Y b)", ParseErrorKind::TrailingInput, 6),
            ("word", ParseErrorKind::UnexpectedClose, 0),
        ];
        for (text, kind, offset) in cases {
            let err = parse_bracketed(text).unwrap_err();
            assert_eq!((err.kind, err.offset), (*kind, *offset), "input {text:?}");
        }
    }

    #[test]
    fn ner_alignment_checked() {
        let err = parse_trees("(S (NN a) (NN b))\n", Some("O\n"), "t").unwrap_err();
        assert!(matches!(err, TreebankError::NerLength { line: 1, ner: 1, tokens: 2 }));
        let ok = parse_trees("(S (NN a) (NN b))\n\n(X c)\n", Some("O O\n\nB-PER\n"), "t").unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[1].sentence.source_id, "t:3");
        assert_eq!(ok[1].sentence.ner.as_deref(), Some(&["B-PER".to_string()][..]));
    }

    /// Random well-formed trees rendered with arbitrary whitespace.
    fn arb_tree() -> impl Strategy<Value = String> {
        let leaf = ("[A-Z]{1,3}", "[a-z0-9]{1,5}").prop_map(|(l, t)| format!("({l} {t})"));
        leaf.prop_recursive(4, 32, 4, |inner| {
            ("[A-Z]{1,3}(-[A-Z]{1,3})?", prop::collection::vec(inner, 1..4))
                .prop_map(|(l, kids)| format!("({l} {})", kids.join(" ")))
        })
    }

    proptest! {
        #[test]
        fn round_trip_and_invariants(src in arb_tree(), pad in "[ \t\n]{0,3}") {
            let spaced = src.replace(' ', &format!(" {pad}"));
            let t = parse_bracketed(&spaced).unwrap();
            prop_assert!(t.check_invariants().is_ok());
            prop_assert_eq!(t.to_bracketed(), normalize_bracketed(&spaced));
            let again = parse_bracketed(&t.to_bracketed()).unwrap();
            prop_assert_eq!(&again, &t);
            // yield agrees with leaf spans
            let leaves = t.leaves();
            for (i, leaf) in leaves.iter().enumerate() {
                prop_assert_eq!(leaf.span, Span::new(i, i + 1));
            }
            prop_assert_eq!(t.yield_tokens().len(), t.span.len());
        }

        #[test]
        fn mutated_brackets_never_panic(src in arb_tree(), cut in 0usize..200, ins in prop::sample::select(vec!['(', ')', ' ', 'X'])) {
            let mut s = src.clone();
            let at = cut.min(s.len());
            s.insert(at, ins);
            let _ = parse_bracketed(&s);
            let truncated = &src[..cut.min(src.len())];
            if let Ok(t) = parse_bracketed(truncated) {
                prop_assert!(t.check_invariants().is_ok());
            }
        }
    }
}
