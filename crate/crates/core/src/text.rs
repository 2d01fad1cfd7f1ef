//! Token-level text utilities: a small PTB-flavoured tokenizer for raw
//! premises and the detokenizer used to render edited token sequences.

use std::ops::Range;

/// Tokens that attach to the previous token without a space.
const ATTACH_LEFT: &[&str] = &[",", ".", ":", ";", "'", "''", "%", "?", "!", ")", "]", "}"];
/// Tokens after which no space is written.
const OPEN_BRACKETS: &[&str] = &["(", "[", "{"];
const CLITICS: &[&str] = &["'s", "'re", "'ve", "'ll", "'d", "'m", "n't"];

fn attaches_left(tok: &str) -> bool {
    ATTACH_LEFT.contains(&tok) || CLITICS.iter().any(|c| tok.eq_ignore_ascii_case(c))
}

/// Joins tokens into surface text and returns the byte range of every token
/// in the output.
pub fn detokenize_with_offsets<S: AsRef<str>>(tokens: &[S]) -> (String, Vec<Range<usize>>) {
    let mut out = String::new();
    let mut ranges = Vec::with_capacity(tokens.len());
    let mut prev: Option<&str> = None;
    for tok in tokens {
        let tok = tok.as_ref();
        if let Some(p) = prev {
            let glue = attaches_left(tok) || OPEN_BRACKETS.contains(&p);
            if !glue {
                out.push(' ');
            }
        }
        let start = out.len();
        out.push_str(tok);
        ranges.push(start..out.len());
        prev = Some(tok);
    }
    (out, ranges)
}

pub fn detokenize_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    detokenize_with_offsets(tokens).0
}

/// Re-renders whitespace-separated text under the detokenization rules.
/// Idempotent.
pub fn detokenize(text: &str) -> String {
    let toks: Vec<&str> = text.split_whitespace().collect();
    detokenize_tokens(&toks)
}

/// Splits raw text into word tokens: punctuation is separated, clitics
/// (`n't`, `'s`, ...) are split off their host.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

fn is_edge_punct(c: char) -> bool {
    matches!(c, ',' | '.' | ':' | ';' | '!' | '?' | '"' | '(' | ')' | '[' | ']' | '{' | '}' | '`')
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut s = chunk;
    let mut leading = Vec::new();
    while let Some(c) = s.chars().next() {
        if is_edge_punct(c) && s.len() > c.len_utf8() {
            leading.push(c.to_string());
            s = &s[c.len_utf8()..];
        } else {
            break;
        }
    }
    let mut trailing = Vec::new();
    while let Some(c) = s.chars().last() {
        if is_edge_punct(c) && s.len() > c.len_utf8() {
            trailing.push(c.to_string());
            s = &s[..s.len() - c.len_utf8()];
        } else {
            break;
        }
    }
    out.extend(leading);
    let lower = s.to_ascii_lowercase();
    let mut core = s.to_string();
    let mut clitic = None;
    for c in CLITICS {
        if lower.len() > c.len() && lower.ends_with(c) {
            let cut = s.len() - c.len();
            if s.is_char_boundary(cut) {
                clitic = Some(s[cut..].to_string());
                core = s[..cut].to_string();
            }
            break;
        }
    }
    out.push(core);
    out.extend(clitic);
    trailing.reverse();
    out.extend(trailing);
}

/// Lowercased word tokens used for lexicon membership tests.
pub fn lower_words(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.to_lowercase()).collect()
}
