//! Vocabulary shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Three-way NLI label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    pub fn index(self) -> usize {
        match self {
            Label::Entailment => 0,
            Label::Neutral => 1,
            Label::Contradiction => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    /// Accepts the full names plus the short forms used in released TSV files.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "ent" | "e" => Ok(Label::Entailment),
            "neutral" | "neu" | "n" => Ok(Label::Neutral),
            "contradiction" | "contra" | "c" => Ok(Label::Contradiction),
            _ => Err(UnknownLabel(s.to_string())),
        }
    }
}

/// The four coordinating conjunctions the pipeline handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConjWord {
    And,
    Or,
    But,
    Nor,
}

impl ConjWord {
    pub const ALL: [ConjWord; 4] = [ConjWord::And, ConjWord::Or, ConjWord::But, ConjWord::Nor];

    /// Case-insensitive match of a single token.
    pub fn from_token(token: &str) -> Option<ConjWord> {
        match token.to_ascii_lowercase().as_str() {
            "and" => Some(ConjWord::And),
            "or" => Some(ConjWord::Or),
            "but" => Some(ConjWord::But),
            "nor" => Some(ConjWord::Nor),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConjWord::And => "and",
            ConjWord::Or => "or",
            ConjWord::But => "but",
            ConjWord::Nor => "nor",
        }
    }

    /// Reporting bucket: "nor" is folded into "or".
    pub fn bucket(self) -> ConjBucket {
        match self {
            ConjWord::And => ConjBucket::And,
            ConjWord::Or | ConjWord::Nor => ConjBucket::Or,
            ConjWord::But => ConjBucket::But,
        }
    }
}

impl fmt::Display for ConjWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Conjunction bucket used for balancing and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConjBucket {
    And,
    Or,
    But,
}

impl ConjBucket {
    pub const ALL: [ConjBucket; 3] = [ConjBucket::And, ConjBucket::Or, ConjBucket::But];

    pub fn as_str(self) -> &'static str {
        match self {
            ConjBucket::And => "and",
            ConjBucket::Or => "or",
            ConjBucket::But => "but",
        }
    }
}

impl fmt::Display for ConjBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Conjunct edit that produced a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operation {
    Remove,
    Add,
    Replace,
    EitherOrProbe,
}

impl Operation {
    pub const ALL: [Operation; 4] = [Operation::Remove, Operation::Add, Operation::Replace, Operation::EitherOrProbe];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplacementKind {
    Antonym,
    CoHyponym,
    Number,
    Name,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Heuristic,
    Human,
    #[default]
    None,
}

/// Half-open index interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}
