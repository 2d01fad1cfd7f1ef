//! Session state, derived purely by folding journal events.

use std::collections::{BTreeMap, BTreeSet};

use conjnli_core::evalkit::{cohen_kappa, DatasetRecord};
use conjnli_core::pairgen::ConjunctSpans;
use conjnli_core::{Label, LabelSource};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

/// A pair as shown to annotators. Any heuristic label on the input is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPair {
    #[serde(default)]
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<ConjunctSpans>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

/// Training example shown with its gold label before round one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupItem {
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    pub explanation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Entailment,
    Neutral,
    Contradiction,
    Ungrammatical,
}

impl Verdict {
    pub fn label(self) -> Option<Label> {
        match self {
            Verdict::Entailment => Some(Label::Entailment),
            Verdict::Neutral => Some(Label::Neutral),
            Verdict::Contradiction => Some(Label::Contradiction),
            Verdict::Ungrammatical => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Entailment,
    Neutral,
    Contradiction,
    Discard,
}

impl Resolution {
    pub fn label(self) -> Option<Label> {
        match self {
            Resolution::Entailment => Some(Label::Entailment),
            Resolution::Neutral => Some(Label::Neutral),
            Resolution::Contradiction => Some(Label::Contradiction),
            Resolution::Discard => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Round {
    One,
    Two,
    Closed,
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        annotators: [String; 2],
        pairs: Vec<SessionPair>,
        #[serde(default)]
        warmup: Vec<WarmupItem>,
        at: u64,
    },
    WarmupAck {
        annotator: String,
        at: u64,
    },
    Label {
        round: u8,
        annotator: String,
        pair_id: String,
        verdict: Verdict,
        at: u64,
    },
    Resolved {
        pair_id: String,
        resolution: Resolution,
        at: u64,
    },
    Closed {
        at: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record {
    pub verdict: Verdict,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub session_id: String,
    pub annotators: [String; 2],
    pub pairs: Vec<SessionPair>,
    pub warmup: Vec<WarmupItem>,
    pub warmup_acked: BTreeSet<usize>,
    /// Keyed by (pair index, annotator index).
    pub round_one: BTreeMap<(usize, usize), Record>,
    pub round_two: BTreeMap<(usize, usize), Record>,
    pub resolutions: BTreeMap<usize, (Resolution, u64)>,
    pub closed_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Next {
    Warmup {
        items: Vec<WarmupItem>,
    },
    Pair {
        round: Round,
        index: usize,
        pair: SessionPair,
        /// Round-one verdicts by annotator; only present in round two.
        #[serde(skip_serializing_if = "Option::is_none")]
        round_one: Option<BTreeMap<String, Verdict>>,
        progress: Progress,
    },
    Done {
        round: Round,
        progress: Progress,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCounts {
    pub pairs: usize,
    pub grammatical: usize,
    pub agreed: usize,
    pub disagreed: usize,
    pub ungrammatical: usize,
    pub resolved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Absent when no pair was judged grammatical by both annotators.
    pub kappa: Option<f64>,
    pub p_o: Option<f64>,
    pub counts: ReportCounts,
    pub disagreed_ids: Vec<String>,
    pub ungrammatical_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Export {
    pub records: Vec<DatasetRecord>,
    pub discarded_ids: Vec<String>,
    pub ungrammatical_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub session_id: String,
    pub round: Round,
    pub annotators: [String; 2],
    pub pairs: usize,
    pub round_one: Progress,
    pub disagreements: usize,
    pub resolutions: usize,
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionState {
    /// Checks a creation request and builds the initial state. Missing pair
    /// ids become `p<index>`.
    pub fn create(event: Event) -> Result<(SessionState, Event), ApiError> {
        let Event::Created { session_id, annotators, mut pairs, warmup, at } = event else {
            return Err(ApiError::corrupt("journal does not start with a creation event"));
        };
        if !valid_session_id(&session_id) {
            return Err(ApiError::bad_request("session_id must be 1-64 characters of [A-Za-z0-9_-]"));
        }
        if annotators[0].trim().is_empty() || annotators[1].trim().is_empty() || annotators[0] == annotators[1] {
            return Err(ApiError::bad_request("exactly two distinct, non-empty annotator ids are required"));
        }
        if pairs.is_empty() {
            return Err(ApiError::bad_request("a session needs at least one pair"));
        }
        let mut seen = BTreeSet::new();
        for (i, p) in pairs.iter_mut().enumerate() {
            if p.id.is_empty() {
                p.id = format!("p{i}");
            }
            if !seen.insert(p.id.clone()) {
                return Err(ApiError::bad_request(format!("duplicate pair id {:?}", p.id)));
            }
        }
        let state = SessionState {
            session_id: session_id.clone(),
            annotators: annotators.clone(),
            pairs: pairs.clone(),
            warmup: warmup.clone(),
            warmup_acked: BTreeSet::new(),
            round_one: BTreeMap::new(),
            round_two: BTreeMap::new(),
            resolutions: BTreeMap::new(),
            closed_at: None,
        };
        Ok((state, Event::Created { session_id, annotators, pairs, warmup, at }))
    }

    pub fn round(&self) -> Round {
        if self.closed_at.is_some() {
            Round::Closed
        } else if self.round_one.len() < 2 * self.pairs.len() {
            Round::One
        } else {
            Round::Two
        }
    }

    pub fn annotator_index(&self, annotator: &str) -> Result<usize, ApiError> {
        self.annotators
            .iter()
            .position(|a| a == annotator)
            .ok_or_else(|| ApiError::not_found(format!("unknown annotator {annotator:?}")))
    }

    pub fn pair_index(&self, pair_id: &str) -> Result<usize, ApiError> {
        self.pairs
            .iter()
            .position(|p| p.id == pair_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown pair {pair_id:?}")))
    }

    fn verdicts(&self, pair: usize) -> Option<(Verdict, Verdict)> {
        Some((self.round_one.get(&(pair, 0))?.verdict, self.round_one.get(&(pair, 1))?.verdict))
    }

    fn is_ungrammatical(&self, pair: usize) -> bool {
        self.round_one.iter().any(|(&(p, _), r)| p == pair && r.verdict == Verdict::Ungrammatical)
    }

    /// Pairs where both annotators gave different labels. Ungrammatical
    /// flags take a pair out of consideration altogether.
    pub fn disagreements(&self) -> Vec<usize> {
        (0..self.pairs.len())
            .filter(
                |&i| matches!(self.verdicts(i), Some((a, b)) if a != b && a.label().is_some() && b.label().is_some()),
            )
            .collect()
    }

    pub fn ungrammatical(&self) -> Vec<usize> {
        (0..self.pairs.len()).filter(|&i| self.is_ungrammatical(i)).collect()
    }

    fn warmup_pending(&self, annotator: usize) -> bool {
        !self.warmup.is_empty() && !self.warmup_acked.contains(&annotator)
    }

    /// Validates `event` against the current state. `Ok(None)` means the
    /// event repeats one already recorded and nothing needs to be written.
    pub fn check(&self, event: &Event) -> Result<Option<()>, ApiError> {
        match event {
            Event::Created { .. } => Err(ApiError::conflict(format!("session {:?} already exists", self.session_id))),
            Event::WarmupAck { annotator, .. } => {
                let a = self.annotator_index(annotator)?;
                Ok((!self.warmup_acked.contains(&a)).then_some(()))
            }
            Event::Label { round, annotator, pair_id, verdict, .. } => {
                let a = self.annotator_index(annotator)?;
                let p = self.pair_index(pair_id)?;
                let current = self.round();
                let (table, expected) = match round {
                    1 => (&self.round_one, Round::One),
                    2 => (&self.round_two, Round::Two),
                    _ => return Err(ApiError::bad_request(format!("round must be 1 or 2, got {round}"))),
                };
                if let Some(prev) = table.get(&(p, a)) {
                    return if prev.verdict == *verdict {
                        Ok(None)
                    } else {
                        Err(ApiError::conflict(format!(
                            "{annotator} already gave {pair_id} a different verdict in round {round}"
                        )))
                    };
                }
                if current != expected {
                    return Err(ApiError::wrong_round(format!("session is in round {current:?}, not round {round}")));
                }
                if expected == Round::One && self.warmup_pending(a) {
                    return Err(ApiError::warmup_pending(annotator));
                }
                if expected == Round::Two && !self.disagreements().contains(&p) {
                    return Err(ApiError::bad_request(format!("{pair_id} is not a round-one disagreement")));
                }
                Ok(Some(()))
            }
            Event::Resolved { pair_id, resolution, .. } => {
                let p = self.pair_index(pair_id)?;
                if let Some((prev, _)) = self.resolutions.get(&p) {
                    return if prev == resolution {
                        Ok(None)
                    } else {
                        Err(ApiError::conflict(format!("{pair_id} already has a different resolution")))
                    };
                }
                if self.round() != Round::Two {
                    return Err(ApiError::wrong_round("resolutions are accepted in round two only"));
                }
                if !self.disagreements().contains(&p) {
                    return Err(ApiError::bad_request(format!("{pair_id} is not a round-one disagreement")));
                }
                Ok(Some(()))
            }
            Event::Closed { .. } => {
                match self.round() {
                    Round::Closed => return Ok(None),
                    Round::One => return Err(ApiError::wrong_round("round one is not complete")),
                    Round::Two => {}
                }
                let open: Vec<&str> = self
                    .disagreements()
                    .into_iter()
                    .filter(|p| !self.resolutions.contains_key(p))
                    .map(|p| self.pairs[p].id.as_str())
                    .collect();
                if !open.is_empty() {
                    return Err(ApiError::conflict(format!("unresolved disagreements: {}", open.join(", "))));
                }
                Ok(Some(()))
            }
        }
    }

    /// Applies an event that already passed [`SessionState::check`].
    pub fn apply(&mut self, event: &Event) -> Result<(), ApiError> {
        match event {
            Event::Created { .. } => return Err(ApiError::corrupt("second creation event")),
            Event::WarmupAck { annotator, .. } => {
                let a = self.annotator_index(annotator)?;
                self.warmup_acked.insert(a);
            }
            Event::Label { round, annotator, pair_id, verdict, at } => {
                let key = (self.pair_index(pair_id)?, self.annotator_index(annotator)?);
                let table = if *round == 1 { &mut self.round_one } else { &mut self.round_two };
                table.insert(key, Record { verdict: *verdict, at: *at });
            }
            Event::Resolved { pair_id, resolution, at } => {
                let p = self.pair_index(pair_id)?;
                self.resolutions.insert(p, (*resolution, *at));
            }
            Event::Closed { at } => self.closed_at = Some(*at),
        }
        Ok(())
    }

    /// Folds a complete event list, re-checking every event.
    pub fn replay(events: &[Event]) -> Result<SessionState, ApiError> {
        let (first, rest) = events.split_first().ok_or_else(|| ApiError::corrupt("empty journal"))?;
        let (mut state, _) = SessionState::create(first.clone())?;
        for e in rest {
            if state.check(e)?.is_some() {
                state.apply(e)?;
            }
        }
        Ok(state)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            session_id: self.session_id.clone(),
            round: self.round(),
            annotators: self.annotators.clone(),
            pairs: self.pairs.len(),
            round_one: Progress { done: self.round_one.len(), total: 2 * self.pairs.len() },
            disagreements: self.disagreements().len(),
            resolutions: self.resolutions.len(),
        }
    }

    pub fn next_for(&self, annotator: &str) -> Result<Next, ApiError> {
        let a = self.annotator_index(annotator)?;
        match self.round() {
            Round::One => {
                if self.warmup_pending(a) {
                    return Ok(Next::Warmup { items: self.warmup.clone() });
                }
                let done = (0..self.pairs.len()).filter(|p| self.round_one.contains_key(&(*p, a))).count();
                let progress = Progress { done, total: self.pairs.len() };
                match (0..self.pairs.len()).find(|p| !self.round_one.contains_key(&(*p, a))) {
                    Some(index) => Ok(Next::Pair {
                        round: Round::One,
                        index,
                        pair: self.pairs[index].clone(),
                        round_one: None,
                        progress,
                    }),
                    None => Ok(Next::Done { round: Round::One, progress }),
                }
            }
            Round::Two => {
                let queue = self.disagreements();
                let done = queue.iter().filter(|p| self.round_two.contains_key(&(**p, a))).count();
                let progress = Progress { done, total: queue.len() };
                match queue.into_iter().find(|p| !self.round_two.contains_key(&(*p, a))) {
                    Some(index) => {
                        let labels =
                            (0..2).map(|k| (self.annotators[k].clone(), self.round_one[&(index, k)].verdict)).collect();
                        Ok(Next::Pair {
                            round: Round::Two,
                            index,
                            pair: self.pairs[index].clone(),
                            round_one: Some(labels),
                            progress,
                        })
                    }
                    None => Ok(Next::Done { round: Round::Two, progress }),
                }
            }
            Round::Closed => Ok(Next::Done { round: Round::Closed, progress: Progress { done: 0, total: 0 } }),
        }
    }

    pub fn report(&self) -> Result<AgreementReport, ApiError> {
        if self.round() == Round::One {
            return Err(ApiError::wrong_round("agreement is reported once round one is complete"));
        }
        let ungrammatical = self.ungrammatical();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for p in 0..self.pairs.len() {
            if let Some((x, y)) = self.verdicts(p) {
                if let (Some(x), Some(y)) = (x.label(), y.label()) {
                    a.push(x);
                    b.push(y);
                }
            }
        }
        let disagreed = self.disagreements();
        let kappa = cohen_kappa(&a, &b).ok();
        let p_o = (!a.is_empty()).then(|| a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64);
        Ok(AgreementReport {
            kappa,
            p_o,
            counts: ReportCounts {
                pairs: self.pairs.len(),
                grammatical: a.len(),
                agreed: a.len() - disagreed.len(),
                disagreed: disagreed.len(),
                ungrammatical: ungrammatical.len(),
                resolved: self.resolutions.len(),
            },
            disagreed_ids: disagreed.iter().map(|&p| self.pairs[p].id.clone()).collect(),
            ungrammatical_ids: ungrammatical.iter().map(|&p| self.pairs[p].id.clone()).collect(),
        })
    }

    /// Agreed pairs plus labeled resolutions, in session order.
    pub fn export(&self) -> Result<Export, ApiError> {
        if self.round() != Round::Closed {
            return Err(ApiError::wrong_round("export requires a closed session"));
        }
        let mut out = Export { records: Vec::new(), discarded_ids: Vec::new(), ungrammatical_ids: Vec::new() };
        for (i, pair) in self.pairs.iter().enumerate() {
            if self.is_ungrammatical(i) {
                out.ungrammatical_ids.push(pair.id.clone());
                continue;
            }
            let (x, y) = self.verdicts(i).ok_or_else(|| ApiError::corrupt("closed session with missing verdicts"))?;
            let label = if x == y { x.label() } else { self.resolutions.get(&i).and_then(|(r, _)| r.label()) };
            match label {
                Some(label) => out.records.push(DatasetRecord {
                    id: pair.id.clone(),
                    premise: pair.premise.clone(),
                    hypothesis: pair.hypothesis.clone(),
                    label,
                    label_source: LabelSource::Human,
                    boolean: None,
                }),
                None => out.discarded_ids.push(pair.id.clone()),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn created(n: usize) -> Event {
        Event::Created {
            session_id: "t".into(),
            annotators: ["a".into(), "b".into()],
            pairs: (0..n)
                .map(|_| SessionPair {
                    id: String::new(),
                    premise: "x and y".into(),
                    hypothesis: "x".into(),
                    spans: None,
                    source_id: None,
                })
                .collect(),
            warmup: vec![],
            at: 0,
        }
    }

    fn label(round: u8, annotator: &str, pair: usize, verdict: Verdict) -> Event {
        Event::Label { round, annotator: annotator.into(), pair_id: format!("p{pair}"), verdict, at: 0 }
    }

    fn step(state: &mut SessionState, e: &Event) -> bool {
        let fresh = state.check(e).unwrap().is_some();
        if fresh {
            state.apply(e).unwrap();
        }
        fresh
    }

    #[test]
    fn missing_pair_ids_are_filled() {
        let (state, event) = SessionState::create(created(3)).unwrap();
        let ids: Vec<&str> = state.pairs.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["p0", "p1", "p2"]);
        let Event::Created { pairs, .. } = event else { unreachable!() };
        assert_eq!(pairs[2].id, "p2");
    }

    #[test]
    fn round_advances_when_every_record_is_in() {
        let (mut s, _) = SessionState::create(created(2)).unwrap();
        for (who, p, v) in [("a", 0, Verdict::Neutral), ("b", 0, Verdict::Neutral), ("a", 1, Verdict::Entailment)] {
            step(&mut s, &label(1, who, p, v));
            assert_eq!(s.round(), Round::One);
        }
        step(&mut s, &label(1, "b", 1, Verdict::Contradiction));
        assert_eq!(s.round(), Round::Two);
        assert_eq!(s.disagreements(), vec![1]);
    }

    #[test]
    fn ungrammatical_is_never_a_disagreement() {
        let (mut s, _) = SessionState::create(created(2)).unwrap();
        step(&mut s, &label(1, "a", 0, Verdict::Ungrammatical));
        step(&mut s, &label(1, "b", 0, Verdict::Entailment));
        step(&mut s, &label(1, "a", 1, Verdict::Ungrammatical));
        step(&mut s, &label(1, "b", 1, Verdict::Ungrammatical));
        assert!(s.disagreements().is_empty());
        assert_eq!(s.ungrammatical(), vec![0, 1]);
        let report = s.report().unwrap();
        assert_eq!(report.kappa, None);
        assert_eq!(report.counts.grammatical, 0);
    }

    #[test]
    fn replay_matches_incremental_application() {
        let events = vec![
            created(2),
            label(1, "a", 0, Verdict::Neutral),
            label(1, "a", 0, Verdict::Neutral),
            label(1, "b", 0, Verdict::Entailment),
            label(1, "a", 1, Verdict::Neutral),
            label(1, "b", 1, Verdict::Neutral),
            Event::Resolved { pair_id: "p0".into(), resolution: Resolution::Entailment, at: 3 },
            Event::Closed { at: 4 },
        ];
        let (mut s, _) = SessionState::create(events[0].clone()).unwrap();
        let fresh: Vec<bool> = events[1..].iter().map(|e| step(&mut s, e)).collect();
        assert_eq!(fresh, [true, false, true, true, true, true, true]);
        assert_eq!(SessionState::replay(&events).unwrap(), s);
        let export = s.export().unwrap();
        assert_eq!(export.records.len(), 2);
        assert_eq!(export.records[0].label, Label::Entailment);
    }

    #[test]
    fn event_wire_format() {
        let e = label(2, "a", 4, Verdict::Ungrammatical);
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["event"], "label");
        assert_eq!(v["verdict"], "ungrammatical");
        assert_eq!(serde_json::from_value::<Event>(v).unwrap(), e);
    }
}
