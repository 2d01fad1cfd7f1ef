//! Dataset I/O, accuracy breakdowns, agreement and seed-instability statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conjunct::{detect_text_features, FeatureLexicons};
use crate::types::{ConjBucket, ConjWord, Label, LabelSource};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("{count} gold ids have no prediction (first: {first:?})")]
    MissingPredictions { count: usize, first: String },
    #[error("{count} predictions name unknown ids (first: {first:?})")]
    UnknownIds { count: usize, first: String },
    #[error("label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("need at least 2 seeds and 2 examples, got {seeds}x{examples}")]
    TooSmall { seeds: usize, examples: usize },
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// One gold NLI record. Optional fields are skipped when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "is_none_source")]
    pub label_source: LabelSource,
    /// Human judgement of whether the conjunction is used in the boolean sense.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boolean: Option<bool>,
}

fn is_none_source(s: &LabelSource) -> bool {
    *s == LabelSource::None
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub split: Option<Split>,
    pub records: Vec<DatasetRecord>,
}

impl LabeledDataset {
    pub fn new(split: Option<Split>, records: Vec<DatasetRecord>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.id.as_str()) {
                return Err(EvalError::DuplicateId { line: i + 1, id: r.id.clone() });
            }
        }
        Ok(LabeledDataset { split, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Counts in `Label::ALL` order.
    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.records {
            c[r.label.index()] += 1;
        }
        c
    }
}

fn line_err(line: usize, message: impl ToString) -> EvalError {
    EvalError::Line { line, message: message.to_string() }
}

/// JSON-lines records; blank lines are skipped but still counted.
pub fn parse_jsonl(content: &str, split: Option<Split>) -> Result<LabeledDataset, EvalError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: DatasetRecord = serde_json::from_str(line).map_err(|e| line_err(i + 1, e))?;
        if !seen.insert(r.id.clone()) {
            return Err(EvalError::DuplicateId { line: i + 1, id: r.id });
        }
        records.push(r);
    }
    Ok(LabeledDataset { split, records })
}

/// Tab-separated `premise, hypothesis, label` rows, as in the released
/// corpus. An optional header row is skipped; ids are `line-N`.
pub fn parse_tsv(content: &str, split: Option<Split>) -> Result<LabeledDataset, EvalError> {
    let mut records = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if i == 0 && cols.first().is_some_and(|c| c.eq_ignore_ascii_case("premise")) {
            continue;
        }
        if cols.len() < 3 {
            return Err(line_err(i + 1, format!("expected 3 tab-separated columns, found {}", cols.len())));
        }
        let label: Label = cols[2].trim().parse().map_err(|e| line_err(i + 1, e))?;
        records.push(DatasetRecord {
            id: format!("line-{}", i + 1),
            premise: cols[0].to_string(),
            hypothesis: cols[1].to_string(),
            label,
            label_source: LabelSource::Human,
            boolean: None,
        });
    }
    Ok(LabeledDataset { split, records })
}

/// Loads JSON-lines, or TSV when the extension is `.tsv`.
pub fn load_dataset(path: &Path, split: Option<Split>) -> Result<LabeledDataset, EvalError> {
    let content = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "tsv") {
        parse_tsv(&content, split)
    } else {
        parse_jsonl(&content, split)
    }
}

pub fn write_jsonl<W: Write>(mut w: W, dataset: &LabeledDataset) -> Result<(), EvalError> {
    for r in &dataset.records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dataset(path: &Path, dataset: &LabeledDataset) -> Result<(), EvalError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_jsonl(&mut w, dataset)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
}

/// JSON-lines `{id, label}` predictions.
pub fn load_predictions(path: &Path) -> Result<BTreeMap<String, Label>, EvalError> {
    let file = std::fs::File::open(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| line_err(i + 1, e))?;
        if out.insert(p.id.clone(), p.label).is_some() {
            return Err(EvalError::DuplicateId { line: i + 1, id: p.id });
        }
    }
    Ok(out)
}

pub const BUCKETS: [&str; 8] = ["and", "or", "but", "multiple", "quantifier", "negation", "boolean", "non-boolean"];

/// Buckets a record belongs to; overlapping by design.
pub fn buckets_of(record: &DatasetRecord, lex: &FeatureLexicons) -> Vec<&'static str> {
    let f = detect_text_features(&record.premise, lex);
    let mut out = Vec::new();
    let has = |b: ConjBucket| f.conjunction_types.iter().any(|c: &ConjWord| c.bucket() == b);
    if has(ConjBucket::And) {
        out.push("and");
    }
    if has(ConjBucket::Or) {
        out.push("or");
    }
    if has(ConjBucket::But) {
        out.push("but");
    }
    if f.is_multiple() {
        out.push("multiple");
    }
    if f.has_quantifier {
        out.push("quantifier");
    }
    if f.has_negation {
        out.push("negation");
    }
    match record.boolean {
        Some(true) => out.push("boolean"),
        Some(false) => out.push("non-boolean"),
        None => {}
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStat {
    pub name: String,
    pub size: usize,
    pub correct: usize,
    /// Absent for empty buckets.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub accuracy: f64,
    pub buckets: Vec<BucketStat>,
    /// `confusion[gold][predicted]` in `Label::ALL` order.
    pub confusion: [[usize; 3]; 3],
}

impl EvalReport {
    pub fn bucket(&self, name: &str) -> Option<&BucketStat> {
        self.buckets.iter().find(|b| b.name == name)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let pct = |a: Option<f64>| a.map_or("-".to_string(), |a| format!("{:.2}", a * 100.0));
        s.push_str("| subset | n | accuracy |\n|---|---:|---:|\n");
        let _ = writeln!(s, "| all | {} | {} |", self.total, pct(Some(self.accuracy)));
        for b in &self.buckets {
            let _ = writeln!(s, "| {} | {} | {} |", b.name, b.size, pct(b.accuracy));
        }
        s.push_str("\n| gold \\ predicted | entailment | neutral | contradiction |\n|---|---:|---:|---:|\n");
        for (l, row) in Label::ALL.iter().zip(&self.confusion) {
            let _ = writeln!(s, "| {l} | {} | {} | {} |", row[0], row[1], row[2]);
        }
        s
    }
}

pub fn evaluate(
    predictions: &BTreeMap<String, Label>,
    gold: &LabeledDataset,
    lex: &FeatureLexicons,
) -> Result<EvalReport, EvalError> {
    let missing: Vec<&str> =
        gold.records.iter().filter(|r| !predictions.contains_key(&r.id)).map(|r| r.id.as_str()).collect();
    if let Some(first) = missing.first() {
        return Err(EvalError::MissingPredictions { count: missing.len(), first: first.to_string() });
    }
    let ids: HashSet<&str> = gold.records.iter().map(|r| r.id.as_str()).collect();
    let unknown: Vec<&String> = predictions.keys().filter(|k| !ids.contains(k.as_str())).collect();
    if let Some(first) = unknown.first() {
        return Err(EvalError::UnknownIds { count: unknown.len(), first: first.to_string() });
    }
    let mut confusion = [[0usize; 3]; 3];
    let mut stats: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in &gold.records {
        let p = predictions[&r.id];
        confusion[r.label.index()][p.index()] += 1;
        let hit = usize::from(p == r.label);
        for b in buckets_of(r, lex) {
            let e = stats.entry(b).or_default();
            e.0 += 1;
            e.1 += hit;
        }
    }
    let total = gold.len();
    let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
    let buckets = BUCKETS
        .iter()
        .map(|&name| {
            let (size, correct) = stats.get(name).copied().unwrap_or((0, 0));
            BucketStat {
                name: name.to_string(),
                size,
                correct,
                accuracy: (size > 0).then(|| correct as f64 / size as f64),
            }
        })
        .collect();
    Ok(EvalReport { total, accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 }, buckets, confusion })
}

/// Chance-corrected agreement between two aligned label lists.
pub fn cohen_kappa(a: &[Label], b: &[Label]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = a.len() as f64;
    let mut ma = [0.0; 3];
    let mut mb = [0.0; 3];
    let mut agree = 0.0;
    for (x, y) in a.iter().zip(b) {
        ma[x.index()] += 1.0;
        mb[y.index()] += 1.0;
        if x == y {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = (0..3).map(|c| (ma[c] / n) * (mb[c] / n)).sum();
    if p_e == 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstabilityStats {
    pub mean_acc: f64,
    pub total_std: f64,
    pub independent_std: f64,
    /// Signed, on the variance scale.
    pub covariance_term: f64,
    pub total_var: f64,
    pub independent_var: f64,
}

fn sample_var(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Splits the variance of per-seed accuracy into per-example variance and
/// the covariance between examples. `correct[s][e]` is 1 when seed `s` got
/// example `e` right. Variances use the unbiased `n - 1` denominator.
pub fn instability_stats(correct: &[Vec<u8>]) -> Result<InstabilityStats, EvalError> {
    let seeds = correct.len();
    let examples = correct.first().map_or(0, Vec::len);
    if seeds < 2 || examples < 2 {
        return Err(EvalError::TooSmall { seeds, examples });
    }
    for (row, r) in correct.iter().enumerate() {
        if r.len() != examples {
            return Err(EvalError::Ragged { row, expected: examples, found: r.len() });
        }
    }
    let e = examples as f64;
    let acc: Vec<f64> = correct.iter().map(|r| r.iter().map(|&c| f64::from(c)).sum::<f64>() / e).collect();
    let mean_acc = acc.iter().sum::<f64>() / seeds as f64;
    let total_var = sample_var(acc.iter().copied());
    let independent_var =
        (0..examples).map(|j| sample_var(correct.iter().map(move |r| f64::from(r[j])))).sum::<f64>() / (e * e);
    Ok(InstabilityStats {
        mean_acc,
        total_std: total_var.sqrt(),
        independent_std: independent_var.sqrt(),
        covariance_term: total_var - independent_var,
        total_var,
        independent_var,
    })
}
