//! Word-piece BIO tags, constrained Viterbi decoding and the late-fusion head.

pub mod fusion;

use std::fmt;
use std::io::BufRead;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fusion::{EmbeddingRecord, FitConfig, FusionError, FusionHead, PROJ_DIM};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BioTag {
    O,
    B(String),
    I(String),
}

impl BioTag {
    pub fn role(&self) -> Option<&str> {
        match self {
            BioTag::O => None,
            BioTag::B(r) | BioTag::I(r) => Some(r),
        }
    }

    pub fn is_inside(&self) -> bool {
        matches!(self, BioTag::I(_))
    }

    /// The tag every non-first piece of a word gets.
    fn continuation(&self) -> BioTag {
        match self {
            BioTag::B(r) => BioTag::I(r.clone()),
            other => other.clone(),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::O => f.write_str("O"),
            BioTag::B(r) => write!(f, "B-{r}"),
            BioTag::I(r) => write!(f, "I-{r}"),
        }
    }
}

impl FromStr for BioTag {
    type Err = SrlError;

    fn from_str(s: &str) -> Result<Self, SrlError> {
        let bad = || SrlError::BadTag(s.to_string());
        if s == "O" {
            return Ok(BioTag::O);
        }
        let (prefix, role) = s.split_once('-').ok_or_else(bad)?;
        if role.is_empty() {
            return Err(bad());
        }
        match prefix {
            "B" => Ok(BioTag::B(role.to_string())),
            "I" => Ok(BioTag::I(role.to_string())),
            _ => Err(bad()),
        }
    }
}

impl Serialize for BioTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BioTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_tags<S: AsRef<str>>(tags: &[S]) -> Result<Vec<BioTag>, SrlError> {
    tags.iter().map(|t| t.as_ref().parse()).collect()
}

/// True when `cur` may follow `prev` (`None` = sequence start).
pub fn transition_allowed(prev: Option<&BioTag>, cur: &BioTag) -> bool {
    match cur {
        BioTag::I(role) => match prev {
            Some(BioTag::B(p)) | Some(BioTag::I(p)) => p == role,
            _ => false,
        },
        _ => true,
    }
}

/// Checks both decoding constraints over a whole sequence.
pub fn is_well_formed(tags: &[BioTag]) -> bool {
    tags.iter().enumerate().all(|(i, t)| transition_allowed(i.checked_sub(1).map(|p| &tags[p]), t))
}

#[derive(Debug, Error, PartialEq)]
pub enum SrlError {
    #[error("malformed BIO tag {0:?}")]
    BadTag(String),
    #[error("{what}: expected {expected}, found {found}")]
    Length { what: &'static str, expected: usize, found: usize },
    #[error("word-piece map: {0}")]
    BadMap(String),
    #[error("tagset has no \"O\"")]
    NoOutside,
    #[error("tag {0} has no matching B- tag")]
    OrphanInside(String),
    #[error("duplicate tag {0} in tagset")]
    DuplicateTag(String),
    #[error("non-finite score at piece {piece}, tag {tag}")]
    NonFinite { piece: usize, tag: usize },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// Maps each word to a contiguous, non-empty range of piece indices.
/// Pieces covered by no word are boundary positions ([CLS], [SEP], ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordPieceMap {
    pub num_pieces: usize,
    pub words: Vec<Range<usize>>,
}

impl WordPieceMap {
    pub fn new(num_pieces: usize, words: Vec<Range<usize>>) -> Result<Self, SrlError> {
        let map = WordPieceMap { num_pieces, words };
        map.validate()?;
        Ok(map)
    }

    /// One piece per word, no boundary positions.
    pub fn identity(n: usize) -> Self {
        WordPieceMap { num_pieces: n, words: (0..n).map(|i| i..i + 1).collect() }
    }

    /// Builds the map from per-word piece counts, optionally framed by one
    /// boundary piece on each side.
    pub fn from_counts(counts: &[usize], with_boundaries: bool) -> Result<Self, SrlError> {
        let mut at = usize::from(with_boundaries);
        let mut words = Vec::with_capacity(counts.len());
        for &c in counts {
            words.push(at..at + c);
            at += c;
        }
        WordPieceMap::new(at + usize::from(with_boundaries), words)
    }

    pub fn validate(&self) -> Result<(), SrlError> {
        let mut prev_end = 0;
        for (i, r) in self.words.iter().enumerate() {
            if r.start >= r.end {
                return Err(SrlError::BadMap(format!("word {i} has no pieces")));
            }
            if r.start < prev_end {
                return Err(SrlError::BadMap(format!("word {i} overlaps or precedes word {}", i.saturating_sub(1))));
            }
            if r.end > self.num_pieces {
                return Err(SrlError::BadMap(format!("word {i} ends past piece {}", self.num_pieces)));
            }
            prev_end = r.end;
        }
        Ok(())
    }

    pub fn is_boundary(&self, piece: usize) -> bool {
        !self.words.iter().any(|r| r.contains(&piece))
    }
}

/// Spreads word tags over pieces: B-X opens on the first piece and
/// continues as I-X, I-X and O copy to every piece, boundaries get O.
pub fn propagate_tags(word_tags: &[BioTag], map: &WordPieceMap) -> Result<Vec<BioTag>, SrlError> {
    map.validate()?;
    if word_tags.len() != map.words.len() {
        return Err(SrlError::Length { what: "word tags", expected: map.words.len(), found: word_tags.len() });
    }
    let mut out = vec![BioTag::O; map.num_pieces];
    for (tag, range) in word_tags.iter().zip(&map.words) {
        out[range.start] = tag.clone();
        for slot in &mut out[range.start + 1..range.end] {
            *slot = tag.continuation();
        }
    }
    Ok(out)
}

/// Each word takes the tag of its first piece.
pub fn recover_word_tags(piece_tags: &[BioTag], map: &WordPieceMap) -> Result<Vec<BioTag>, SrlError> {
    map.validate()?;
    if piece_tags.len() != map.num_pieces {
        return Err(SrlError::Length { what: "piece tags", expected: map.num_pieces, found: piece_tags.len() });
    }
    Ok(map.words.iter().map(|r| piece_tags[r.start].clone()).collect())
}

/// Per-piece tag scores. `scores` is row-major, one row per piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagLattice {
    pub pieces: Vec<String>,
    pub tagset: Vec<String>,
    pub scores: Vec<f64>,
    pub wordpiece_map: Vec<Range<usize>>,
}

impl TagLattice {
    pub fn score(&self, piece: usize, tag: usize) -> f64 {
        self.scores[piece * self.tagset.len() + tag]
    }

    pub fn map(&self) -> WordPieceMap {
        WordPieceMap { num_pieces: self.pieces.len(), words: self.wordpiece_map.clone() }
    }

    /// Checks the lattice and returns its parsed tagset.
    pub fn validate(&self) -> Result<Vec<BioTag>, SrlError> {
        let tags = validate_tagset(&self.tagset)?;
        let expected = self.pieces.len() * tags.len();
        if self.scores.len() != expected {
            return Err(SrlError::Length { what: "scores", expected, found: self.scores.len() });
        }
        if let Some(i) = self.scores.iter().position(|s| !s.is_finite()) {
            return Err(SrlError::NonFinite { piece: i / tags.len(), tag: i % tags.len() });
        }
        self.map().validate()?;
        Ok(tags)
    }
}

pub fn validate_tagset<S: AsRef<str>>(tagset: &[S]) -> Result<Vec<BioTag>, SrlError> {
    let tags = parse_tags(tagset)?;
    if !tags.contains(&BioTag::O) {
        return Err(SrlError::NoOutside);
    }
    for (i, t) in tags.iter().enumerate() {
        if tags[..i].contains(t) {
            return Err(SrlError::DuplicateTag(t.to_string()));
        }
        if let BioTag::I(role) = t {
            if !tags.contains(&BioTag::B(role.clone())) {
                return Err(SrlError::OrphanInside(t.to_string()));
            }
        }
    }
    Ok(tags)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub tags: Vec<BioTag>,
    pub indices: Vec<usize>,
    pub score: f64,
    pub word_tags: Vec<BioTag>,
}

/// Best constrained path over a raw score matrix (`n` rows of
/// `tagset.len()` scores). Among equal-scoring paths the one with the lowest
/// tag index at the latest differing position wins.
pub fn viterbi_indices(scores: &[f64], n: usize, tagset: &[BioTag]) -> (Vec<usize>, f64) {
    let m = tagset.len();
    assert_eq!(scores.len(), n * m, "score matrix shape");
    assert!(tagset.contains(&BioTag::O), "tagset must contain O");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let allowed: Vec<Vec<bool>> =
        (0..m).map(|j| (0..m).map(|k| transition_allowed(Some(&tagset[j]), &tagset[k])).collect()).collect();
    let mut delta: Vec<f64> =
        (0..m).map(|k| if transition_allowed(None, &tagset[k]) { scores[k] } else { f64::NEG_INFINITY }).collect();
    let mut back = vec![0usize; n * m];
    for t in 1..n {
        let mut next = vec![f64::NEG_INFINITY; m];
        for k in 0..m {
            let mut best = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for j in 0..m {
                if allowed[j][k] && delta[j] > best {
                    best = delta[j];
                    arg = j;
                }
            }
            if arg != usize::MAX {
                next[k] = best + scores[t * m + k];
                back[t * m + k] = arg;
            }
        }
        delta = next;
    }
    let mut last = 0;
    for k in 1..m {
        if delta[k] > delta[last] {
            last = k;
        }
    }
    let score = delta[last];
    assert!(score.is_finite(), "no valid tag sequence");
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t * m + path[t]];
    }
    (path, score)
}

pub fn constrained_viterbi(lattice: &TagLattice) -> Result<Decoded, SrlError> {
    let tagset = lattice.validate()?;
    let (indices, score) = viterbi_indices(&lattice.scores, lattice.pieces.len(), &tagset);
    let tags: Vec<BioTag> = indices.iter().map(|&i| tagset[i].clone()).collect();
    let word_tags = recover_word_tags(&tags, &lattice.map())?;
    Ok(Decoded { tags, indices, score, word_tags })
}

/// Reads a JSON-lines lattice file.
pub fn read_lattices(path: &Path) -> Result<Vec<TagLattice>, SrlError> {
    let file = std::fs::File::open(path).map_err(|e| SrlError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SrlError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let lattice: TagLattice =
            serde_json::from_str(&line).map_err(|e| SrlError::Line { line: i + 1, message: e.to_string() })?;
        lattice.validate().map_err(|e| SrlError::Line { line: i + 1, message: e.to_string() })?;
        out.push(lattice);
    }
    Ok(out)
}

#[cfg(test)]
#[allow(clippy::single_range_in_vec_init)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tags(s: &str) -> Vec<BioTag> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    #[test]
    fn tag_parsing() {
        assert_eq!("B-ARG1".parse::<BioTag>().unwrap(), BioTag::B("ARG1".into()));
        assert_eq!("I-ARGM-TMP".parse::<BioTag>().unwrap(), BioTag::I("ARGM-TMP".into()));
        for bad in ["", "B", "B-", "X-ARG0", "o"] {
            assert!(bad.parse::<BioTag>().is_err(), "{bad}");
        }
        assert_eq!(BioTag::I("V".into()).to_string(), "I-V");
    }

    #[test]
    fn playing_splits_into_b_then_i() {
        let map = WordPieceMap::from_counts(&[2], false).unwrap();
        assert_eq!(propagate_tags(&tags("B-ARG1"), &map).unwrap(), tags("B-ARG1 I-ARG1"));
        assert_eq!(recover_word_tags(&tags("B-ARG1 I-ARG1"), &map).unwrap(), tags("B-ARG1"));
    }

    #[test]
    fn outside_and_inside_copy_to_all_pieces() {
        let map = WordPieceMap::from_counts(&[3], false).unwrap();
        assert_eq!(propagate_tags(&tags("O"), &map).unwrap(), tags("O O O"));
        let map = WordPieceMap::from_counts(&[1, 2], false).unwrap();
        assert_eq!(propagate_tags(&tags("B-A I-A"), &map).unwrap(), tags("B-A I-A I-A"));
    }

    #[test]
    fn single_piece_words_are_identity() {
        let t = tags("B-ARG0 I-ARG0 B-V O B-ARG1");
        let map = WordPieceMap::identity(t.len());
        assert_eq!(propagate_tags(&t, &map).unwrap(), t);
        assert_eq!(recover_word_tags(&t, &map).unwrap(), t);
    }

    #[test]
    fn boundary_pieces_get_outside() {
        let map = WordPieceMap::from_counts(&[1, 2], true).unwrap();
        assert_eq!(map.num_pieces, 5);
        assert!(map.is_boundary(0) && map.is_boundary(4));
        assert_eq!(propagate_tags(&tags("I-A B-V"), &map).unwrap(), tags("O I-A B-V I-V O"));
    }

    #[test]
    fn propagation_errors() {
        let map = WordPieceMap::identity(2);
        assert!(matches!(propagate_tags(&tags("O"), &map), Err(SrlError::Length { .. })));
        assert!(matches!(recover_word_tags(&tags("O"), &map), Err(SrlError::Length { .. })));
        assert!(WordPieceMap::new(3, vec![0..2, 1..3]).is_err());
        assert!(WordPieceMap::new(3, vec![0..0]).is_err());
        assert!(WordPieceMap::new(2, vec![0..3]).is_err());
    }

    #[test]
    fn tagset_validation() {
        assert_eq!(validate_tagset(&["B-A", "I-A"]), Err(SrlError::NoOutside));
        assert_eq!(validate_tagset(&["O", "I-A"]), Err(SrlError::OrphanInside("I-A".into())));
        assert_eq!(validate_tagset(&["O", "O"]), Err(SrlError::DuplicateTag("O".into())));
        assert!(validate_tagset(&["O", "B-A", "I-A"]).is_ok());
    }

    #[test]
    fn start_constraint_on_one_position() {
        let ts = tags("B-A I-A O");
        let (path, score) = viterbi_indices(&[0.1, 5.0, 0.3], 1, &ts);
        assert_eq!(path, vec![2]);
        assert_eq!(score, 0.3);
    }

    #[test]
    fn zero_scores_prefer_lowest_index() {
        let ts = tags("O B-A I-A B-B I-B");
        let (path, score) = viterbi_indices(&[0.0; 20], 4, &ts);
        assert_eq!(path, vec![0; 4]);
        assert_eq!(score, 0.0);
        // with O last, lowest index among valid tags wins instead
        let ts = tags("B-A I-A O");
        let (path, _) = viterbi_indices(&[0.0; 9], 3, &ts);
        assert_eq!(path, vec![0, 0, 0]);
    }

    #[test]
    fn inside_must_continue_same_role() {
        let ts = tags("O B-A I-A B-B I-B");
        // I-A strongly preferred at position 1 but position 0 favours B-B
        let scores = [0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0];
        let (path, score) = viterbi_indices(&scores, 2, &ts);
        assert_eq!(path, vec![1, 2]);
        assert_eq!(score, 10.0);
    }

    #[test]
    fn lattice_validation_and_decode() {
        let lattice = TagLattice {
            pieces: vec!["[CLS]".into(), "play".into(), "##ing".into(), "[SEP]".into()],
            tagset: vec!["O".into(), "B-V".into(), "I-V".into()],
            scores: vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0],
            wordpiece_map: vec![1..3],
        };
        let d = constrained_viterbi(&lattice).unwrap();
        assert_eq!(d.tags, tags("O B-V I-V O"));
        assert_eq!(d.word_tags, tags("B-V"));
        assert_eq!(d.score, 6.0);
        let mut bad = lattice.clone();
        bad.scores[3] = f64::NAN;
        assert_eq!(constrained_viterbi(&bad).unwrap_err(), SrlError::NonFinite { piece: 1, tag: 0 });
        let mut bad = lattice;
        bad.scores.pop();
        assert!(matches!(constrained_viterbi(&bad), Err(SrlError::Length { .. })));
    }

    #[test]
    fn lattice_json_line() {
        let line = r#"{"pieces":["a","b"],"tagset":["O","B-A","I-A"],"scores":[0,1,0,0,0,1],"wordpiece_map":[{"start":0,"end":1},{"start":1,"end":2}]}"#;
        let l: TagLattice = serde_json::from_str(line).unwrap();
        assert_eq!(constrained_viterbi(&l).unwrap().tags, tags("B-A I-A"));
    }

    /// Exhaustive argmax with the same tie-break, summing left to right.
    pub(crate) fn brute_force(scores: &[f64], n: usize, tagset: &[BioTag]) -> (Vec<usize>, f64) {
        let m = tagset.len();
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut seq = vec![0usize; n];
        for code in 0..m.pow(n as u32) {
            let mut c = code;
            for slot in seq.iter_mut() {
                *slot = c % m;
                c /= m;
            }
            let t: Vec<BioTag> = seq.iter().map(|&i| tagset[i].clone()).collect();
            if !is_well_formed(&t) {
                continue;
            }
            let s = seq.iter().enumerate().fold(0.0, |acc, (p, &k)| acc + scores[p * m + k]);
            let better = match &best {
                None => true,
                Some((b, bs)) => s > *bs || (s == *bs && seq.iter().rev().lt(b.iter().rev())),
            };
            if better {
                best = Some((seq.clone(), s));
            }
        }
        best.unwrap()
    }

    fn tagset_strategy() -> impl Strategy<Value = Vec<BioTag>> {
        (0usize..=2).prop_flat_map(|roles| {
            let mut base = vec![BioTag::O];
            for r in 0..roles {
                base.push(BioTag::B(format!("R{r}")));
                base.push(BioTag::I(format!("R{r}")));
            }
            Just(base).prop_shuffle()
        })
    }

    fn lattice_strategy() -> impl Strategy<Value = (Vec<BioTag>, usize, Vec<f64>)> {
        (tagset_strategy(), 0usize..=6).prop_flat_map(|(ts, n)| {
            let m = ts.len();
            // small integer grid makes exact ties common
            (Just(ts), Just(n), prop::collection::vec((-3i32..=3).prop_map(|v| v as f64 * 0.5), n * m))
        })
    }

    proptest! {
        #[test]
        fn viterbi_matches_brute_force((ts, n, scores) in lattice_strategy()) {
            let (path, score) = viterbi_indices(&scores, n, &ts);
            let (bp, bs) = brute_force(&scores, n, &ts);
            prop_assert_eq!(&path, &bp);
            prop_assert_eq!(score, bs);
            let t: Vec<BioTag> = path.iter().map(|&i| ts[i].clone()).collect();
            prop_assert!(is_well_formed(&t));
        }

        #[test]
        fn column_shift_moves_score_only(
            (ts, n, scores) in lattice_strategy().prop_filter("non-empty", |(_, n, _)| *n > 0),
            col in 0usize..6,
            shift in -4i32..=4,
        ) {
            let col = col % n;
            let m = ts.len();
            let c = shift as f64 * 0.25;
            let mut shifted = scores.clone();
            for k in 0..m {
                shifted[col * m + k] += c;
            }
            let (p1, s1) = viterbi_indices(&scores, n, &ts);
            let (p2, s2) = viterbi_indices(&shifted, n, &ts);
            prop_assert_eq!(p1, p2);
            prop_assert!((s2 - s1 - c).abs() < 1e-9);
        }

        #[test]
        fn recover_inverts_propagate(
            words in prop::collection::vec((0usize..3, 1usize..4), 0..12),
            boundaries in any::<bool>(),
        ) {
            let mut word_tags = Vec::new();
            for (i, (kind, _)) in words.iter().enumerate() {
                let role = format!("A{}", i % 2);
                let prev_role = word_tags.last().and_then(|t: &BioTag| t.role().map(str::to_string));
                let tag = match kind {
                    0 => BioTag::O,
                    1 => BioTag::B(role),
                    _ => match prev_role {
                        Some(r) => BioTag::I(r),
                        None => BioTag::O,
                    },
                };
                word_tags.push(tag);
            }
            prop_assert!(is_well_formed(&word_tags));
            let counts: Vec<usize> = words.iter().map(|(_, c)| *c).collect();
            let map = WordPieceMap::from_counts(&counts, boundaries).unwrap();
            let pieces = propagate_tags(&word_tags, &map).unwrap();
            prop_assert_eq!(pieces.len(), map.num_pieces);
            prop_assert!(is_well_formed(&pieces));
            prop_assert_eq!(recover_word_tags(&pieces, &map).unwrap(), word_tags);
        }
    }
}
