//! Fine-tuning schedules over a pluggable classifier.
//!
//! [`iaft_train`] mixes the constant adversarial set with a fresh, equally
//! sized sample of base data every epoch; [`aft_train`] runs plain epochs
//! over the adversarial set; [`HypothesisOnly`] blanks the premise to probe
//! a dataset for label leakage. [`ToyClassifier`] is a hashed-feature linear
//! model that implements the [`Classifier`] contract at desk scale.

use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::lower_words;
use crate::types::{ConjWord, Label};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
}

impl Example {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>, label: Label) -> Self {
        Example { premise: premise.into(), hypothesis: hypothesis.into(), label }
    }

    pub fn has_conjunction(&self) -> bool {
        lower_words(&self.premise)
            .iter()
            .chain(lower_words(&self.hypothesis).iter())
            .any(|w| ConjWord::from_token(w).is_some())
    }
}

/// What a trainable NLI model has to provide.
pub trait Classifier {
    type Snapshot: Clone;

    /// One online pass over `batch` in the given order.
    fn fit_batch(&mut self, batch: &[Example]);
    /// Deterministic between `fit_batch` calls.
    fn predict(&self, example: &Example) -> Label;
    fn snapshot(&self) -> Self::Snapshot;
    fn restore(&mut self, snapshot: &Self::Snapshot);
}

pub fn accuracy<C: Classifier + ?Sized>(model: &C, data: &[Example]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data.iter().filter(|e| model.predict(e) == e.label).count();
    correct as f64 / data.len() as f64
}

/// Short content hash of an ordered example list.
pub fn fingerprint<'a>(examples: impl IntoIterator<Item = &'a Example>) -> String {
    let mut h = Sha256::new();
    for e in examples {
        h.update(e.premise.as_bytes());
        h.update([0]);
        h.update(e.hypothesis.as_bytes());
        h.update([0]);
        h.update(e.label.as_str().as_bytes());
        h.update(*b"\n");
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("adversarial training set is empty")]
    EmptyAdversarial,
    #[error("training set is empty")]
    EmptyTrain,
    #[error("need {k} base examples per epoch but only {available} pass the conjunction filter")]
    NotEnoughBase { k: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub num_epochs: usize,
    pub seed: u64,
    /// Sample base examples only among those containing and/or/but/nor.
    pub conjunction_filter: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule { num_epochs: 3, seed: 42, conjunction_filter: true }
    }
}

/// Named evaluation set scored after every epoch.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub name: &'a str,
    pub examples: &'a [Example],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub pool_size: usize,
    /// Indices into the conjunction-filtered base set.
    pub base_sample: Vec<usize>,
    pub base_fingerprint: String,
    pub adv_fingerprint: String,
    pub pool_fingerprint: String,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub method: String,
    pub k: usize,
    pub base_size: usize,
    pub filtered_base_size: usize,
    pub sampling: String,
    pub conjunction_filter: String,
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((epoch as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

fn score<C: Classifier>(model: &C, evals: &[EvalSet<'_>]) -> BTreeMap<String, f64> {
    evals.iter().map(|e| (e.name.to_string(), accuracy(model, e.examples))).collect()
}

/// Iterative adversarial fine-tuning. `model` must already be fitted on
/// `base`. For each epoch a fresh k-sample (k = |adv|, without replacement)
/// is drawn from the filtered base set, joined with `adv`, shuffled and fed
/// to `fit_batch`.
pub fn iaft_train<C: Classifier>(
    model: &mut C,
    base: &[Example],
    adv: &[Example],
    schedule: &TrainSchedule,
    evals: &[EvalSet<'_>],
) -> Result<TrainLog, TrainError> {
    if adv.is_empty() {
        return Err(TrainError::EmptyAdversarial);
    }
    let k = adv.len();
    let filtered: Vec<&Example> = base.iter().filter(|e| !schedule.conjunction_filter || e.has_conjunction()).collect();
    if k > filtered.len() {
        return Err(TrainError::NotEnoughBase { k, available: filtered.len() });
    }
    let adv_fingerprint = fingerprint(adv);
    let mut log = TrainLog {
        method: "iaft".into(),
        k,
        base_size: base.len(),
        filtered_base_size: filtered.len(),
        sampling: "uniform without replacement within an epoch; independent draws across epochs".into(),
        conjunction_filter: if schedule.conjunction_filter {
            "premise or hypothesis contains a token in {and, or, but, nor}".into()
        } else {
            "off".into()
        },
        seed: schedule.seed,
        epochs: Vec::with_capacity(schedule.num_epochs),
    };
    for epoch in 1..=schedule.num_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(schedule.seed, epoch));
        let sample = index::sample(&mut rng, filtered.len(), k).into_vec();
        let mut pool: Vec<Example> = sample.iter().map(|&i| filtered[i].clone()).collect();
        let base_fingerprint = fingerprint(&pool);
        pool.extend_from_slice(adv);
        pool.shuffle(&mut rng);
        model.fit_batch(&pool);
        log.epochs.push(EpochLog {
            epoch,
            pool_size: pool.len(),
            base_sample: sample,
            base_fingerprint,
            adv_fingerprint: adv_fingerprint.clone(),
            pool_fingerprint: fingerprint(&pool),
            metrics: score(model, evals),
        });
    }
    Ok(log)
}

/// Plain adversarial fine-tuning: `epochs` passes over `adv` only.
pub fn aft_train<C: Classifier>(
    model: &mut C,
    adv: &[Example],
    epochs: usize,
    evals: &[EvalSet<'_>],
) -> Result<TrainLog, TrainError> {
    if adv.is_empty() {
        return Err(TrainError::EmptyAdversarial);
    }
    let fp = fingerprint(adv);
    let mut log = TrainLog {
        method: "aft".into(),
        k: adv.len(),
        base_size: 0,
        filtered_base_size: 0,
        sampling: "none".into(),
        conjunction_filter: "off".into(),
        seed: 0,
        epochs: Vec::new(),
    };
    for epoch in 1..=epochs {
        model.fit_batch(adv);
        log.epochs.push(EpochLog {
            epoch,
            pool_size: adv.len(),
            base_sample: Vec::new(),
            base_fingerprint: String::new(),
            adv_fingerprint: fp.clone(),
            pool_fingerprint: fp.clone(),
            metrics: score(model, evals),
        });
    }
    Ok(log)
}

/// Runs a classifier with the premise blanked, in training and prediction.
#[derive(Debug, Clone)]
pub struct HypothesisOnly<C>(pub C);

fn blank(e: &Example) -> Example {
    Example { premise: String::new(), hypothesis: e.hypothesis.clone(), label: e.label }
}

impl<C: Classifier> Classifier for HypothesisOnly<C> {
    type Snapshot = C::Snapshot;

    fn fit_batch(&mut self, batch: &[Example]) {
        let blanked: Vec<Example> = batch.iter().map(blank).collect();
        self.0.fit_batch(&blanked);
    }

    fn predict(&self, example: &Example) -> Label {
        self.0.predict(&blank(example))
    }

    fn snapshot(&self) -> Self::Snapshot {
        self.0.snapshot()
    }

    fn restore(&mut self, snapshot: &Self::Snapshot) {
        self.0.restore(snapshot)
    }
}

/// Trains `model` for `epochs` passes on `train` with premises blanked.
pub fn hypothesis_only_train<C: Classifier>(
    model: C,
    train: &[Example],
    epochs: usize,
) -> Result<HypothesisOnly<C>, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let mut wrapped = HypothesisOnly(model);
    for _ in 0..epochs {
        wrapped.fit_batch(train);
    }
    Ok(wrapped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Feature space has `2^dim_bits` buckets per class.
    pub dim_bits: u32,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { dim_bits: 18, learning_rate: 0.1, epochs: 3 }
    }
}

/// Multinomial logistic regression over hashed sparse features, trained
/// online with cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyClassifier {
    config: ToyConfig,
    weights: Vec<f64>,
}

/// Sparse, serializable model state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySnapshot {
    pub config: ToyConfig,
    pub weights: Vec<(u32, f64)>,
}

pub const OVERLAP_BUCKETS: usize = 5;

/// Fraction of hypothesis word types also in the premise, bucketed into
/// `0..OVERLAP_BUCKETS`.
pub fn overlap_bucket(premise: &[String], hypothesis: &[String]) -> usize {
    use std::collections::HashSet;
    let h: HashSet<&String> = hypothesis.iter().collect();
    let p: HashSet<&String> = premise.iter().collect();
    let ratio = if h.is_empty() {
        if p.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        h.intersection(&p).count() as f64 / h.len() as f64
    };
    ((ratio * (OVERLAP_BUCKETS - 1) as f64).floor() as usize).min(OVERLAP_BUCKETS - 1)
}

/// Feature strings for one example.
pub fn feature_names(example: &Example) -> Vec<String> {
    let p = lower_words(&example.premise);
    let h = lower_words(&example.hypothesis);
    let mut out = vec!["bias".to_string()];
    for (prefix, words) in [("p", &p), ("h", &h)] {
        for w in words.iter() {
            out.push(format!("{prefix}:{w}"));
            if ConjWord::from_token(w).is_some() {
                out.push(format!("{prefix}c:{w}"));
            }
        }
        for pair in words.windows(2) {
            out.push(format!("{prefix}b:{}_{}", pair[0], pair[1]));
        }
    }
    out.push(format!("ov:{}", overlap_bucket(&p, &h)));
    let sign = match h.len().cmp(&p.len()) {
        std::cmp::Ordering::Less => "neg",
        std::cmp::Ordering::Equal => "zero",
        std::cmp::Ordering::Greater => "pos",
    };
    out.push(format!("len:{sign}"));
    out
}

impl ToyClassifier {
    pub fn new(config: ToyConfig) -> Self {
        let dim = 1usize << config.dim_bits;
        ToyClassifier { weights: vec![0.0; 3 * dim], config }
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    fn dim(&self) -> usize {
        1usize << self.config.dim_bits
    }

    fn features(&self, example: &Example) -> Vec<usize> {
        let mask = self.dim() - 1;
        let mut idx: Vec<usize> = feature_names(example)
            .iter()
            .map(|f| {
                let mut h = FnvHasher::default();
                h.write(f.as_bytes());
                (h.finish() as usize) & mask
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    fn logits(&self, feats: &[usize]) -> [f64; 3] {
        let dim = self.dim();
        let mut z = [0.0; 3];
        for (c, zc) in z.iter_mut().enumerate() {
            *zc = feats.iter().map(|&f| self.weights[c * dim + f]).sum();
        }
        z
    }

    /// Class probabilities.
    pub fn predict_proba(&self, example: &Example) -> [f64; 3] {
        softmax(self.logits(&self.features(example)))
    }

    /// `config.epochs` passes over `data`.
    pub fn fit(&mut self, data: &[Example]) {
        for _ in 0..self.config.epochs {
            self.fit_batch(data);
        }
    }

    pub fn from_snapshot(snapshot: &ToySnapshot) -> Self {
        let mut m = ToyClassifier::new(snapshot.config.clone());
        m.restore(snapshot);
        m
    }
}

fn softmax(z: [f64; 3]) -> [f64; 3] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

impl Classifier for ToyClassifier {
    type Snapshot = ToySnapshot;

    fn fit_batch(&mut self, batch: &[Example]) {
        let dim = self.dim();
        let lr = self.config.learning_rate;
        for ex in batch {
            let feats = self.features(ex);
            let p = softmax(self.logits(&feats));
            for (c, pc) in p.iter().enumerate() {
                let g = pc - if c == ex.label.index() { 1.0 } else { 0.0 };
                for &f in &feats {
                    self.weights[c * dim + f] -= lr * g;
                }
            }
        }
    }

    fn predict(&self, example: &Example) -> Label {
        let z = self.logits(&self.features(example));
        // lowest label index wins ties
        let best = (0..3).fold(0, |b, c| if z[c] > z[b] { c } else { b });
        Label::from_index(best).unwrap()
    }

    fn snapshot(&self) -> ToySnapshot {
        ToySnapshot {
            config: self.config.clone(),
            weights: self.weights.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(i, w)| (i as u32, *w)).collect(),
        }
    }

    fn restore(&mut self, snapshot: &ToySnapshot) {
        if snapshot.config.dim_bits != self.config.dim_bits {
            *self = ToyClassifier::new(snapshot.config.clone());
        }
        self.config = snapshot.config.clone();
        self.weights.iter_mut().for_each(|w| *w = 0.0);
        for &(i, w) in &snapshot.weights {
            self.weights[i as usize] = w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    fn ex(p: &str, h: &str, l: Label) -> Example {
        Example::new(p, h, l)
    }

    /// Records every batch handed to it.
    #[derive(Default)]
    struct Recorder {
        batches: RefCell<Vec<Vec<Example>>>,
    }

    impl Classifier for Recorder {
        type Snapshot = usize;
        fn fit_batch(&mut self, batch: &[Example]) {
            self.batches.borrow_mut().push(batch.to_vec());
        }
        fn predict(&self, _: &Example) -> Label {
            Label::Neutral
        }
        fn snapshot(&self) -> usize {
            self.batches.borrow().len()
        }
        fn restore(&mut self, _: &usize) {}
    }

    fn base_set(n: usize) -> Vec<Example> {
        (0..n).map(|i| ex(&format!("x{i} and y{i}"), &format!("x{i}"), Label::Entailment)).collect()
    }

    #[test]
    fn pool_is_adv_plus_fresh_sample() {
        let base = base_set(40);
        let adv: Vec<Example> =
            (0..5).map(|i| ex(&format!("total a{i} and b{i}"), &format!("a{i}"), Label::Contradiction)).collect();
        let mut rec = Recorder::default();
        let sched = TrainSchedule { num_epochs: 4, seed: 9, conjunction_filter: true };
        let log = iaft_train(&mut rec, &base, &adv, &sched, &[]).unwrap();
        let batches = rec.batches.borrow();
        assert_eq!(batches.len(), 4);
        let mut base_fps = std::collections::HashSet::new();
        for (b, e) in batches.iter().zip(&log.epochs) {
            assert_eq!(b.len(), 10);
            let adv_part: Vec<&Example> = b.iter().filter(|x| adv.contains(x)).collect();
            assert_eq!(adv_part.len(), 5);
            let mut distinct: Vec<&Example> = b.iter().filter(|x| !adv.contains(x)).collect();
            distinct.sort_by(|a, b| a.premise.cmp(&b.premise));
            distinct.dedup();
            assert_eq!(distinct.len(), 5, "no duplicates within an epoch");
            assert_eq!(e.adv_fingerprint, fingerprint(&adv));
            base_fps.insert(e.base_fingerprint.clone());
        }
        assert_eq!(base_fps.len(), 4);
    }

    #[test]
    fn reproducible_logs() {
        let base = base_set(30);
        let adv = base_set(3);
        let sched = TrainSchedule { num_epochs: 2, seed: 1, conjunction_filter: true };
        let mut a = ToyClassifier::new(ToyConfig { dim_bits: 12, ..Default::default() });
        let mut b = a.clone();
        let la = iaft_train(&mut a, &base, &adv, &sched, &[EvalSet { name: "base", examples: &base }]).unwrap();
        let lb = iaft_train(&mut b, &base, &adv, &sched, &[EvalSet { name: "base", examples: &base }]).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a.snapshot(), b.snapshot());
    }

    #[test]
    fn zero_epochs_is_identity() {
        let mut m = ToyClassifier::new(ToyConfig { dim_bits: 10, ..Default::default() });
        let before = m.snapshot();
        iaft_train(&mut m, &base_set(5), &base_set(2), &TrainSchedule { num_epochs: 0, ..Default::default() }, &[])
            .unwrap();
        aft_train(&mut m, &base_set(2), 0, &[]).unwrap();
        assert_eq!(m.snapshot(), before);
    }

    #[test]
    fn degenerate_single_example() {
        let one = vec![ex("a and b", "a", Label::Entailment)];
        let mut rec = Recorder::default();
        iaft_train(&mut rec, &one, &one, &TrainSchedule { num_epochs: 2, ..Default::default() }, &[]).unwrap();
        for b in rec.batches.borrow().iter() {
            assert_eq!(b, &vec![one[0].clone(), one[0].clone()]);
        }
    }

    #[test]
    fn schedule_errors() {
        let mut rec = Recorder::default();
        let s = TrainSchedule::default();
        assert!(matches!(iaft_train(&mut rec, &base_set(3), &[], &s, &[]), Err(TrainError::EmptyAdversarial)));
        assert!(matches!(
            iaft_train(&mut rec, &base_set(3), &base_set(4), &s, &[]),
            Err(TrainError::NotEnoughBase { k: 4, available: 3 })
        ));
        let no_conj = vec![ex("a b", "a", Label::Entailment); 10];
        assert!(matches!(
            iaft_train(&mut rec, &no_conj, &base_set(1), &s, &[]),
            Err(TrainError::NotEnoughBase { k: 1, available: 0 })
        ));
        assert!(matches!(aft_train(&mut rec, &[], 1, &[]), Err(TrainError::EmptyAdversarial)));
        assert!(hypothesis_only_train(Recorder::default(), &[], 1).is_err());
    }

    #[test]
    fn toy_total_on_empty_input() {
        let m = ToyClassifier::new(ToyConfig { dim_bits: 8, ..Default::default() });
        let l = m.predict(&ex("", "", Label::Neutral));
        assert!(Label::ALL.contains(&l));
    }

    #[test]
    fn identical_texts_hit_top_overlap_bucket() {
        let w = lower_words("the cat sat on the mat");
        assert_eq!(overlap_bucket(&w, &w), OVERLAP_BUCKETS - 1);
        assert_eq!(overlap_bucket(&w, &lower_words("dogs bark")), 0);
        let names = feature_names(&ex("a and b", "a and b", Label::Neutral));
        assert!(names.contains(&format!("ov:{}", OVERLAP_BUCKETS - 1)));
        assert!(names.contains(&"pc:and".to_string()));
        assert!(names.contains(&"len:zero".to_string()));
    }

    #[test]
    fn snapshot_round_trip() {
        let mut m = ToyClassifier::new(ToyConfig { dim_bits: 12, ..Default::default() });
        let data = base_set(20);
        m.fit(&data);
        let snap = m.snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: ToySnapshot = serde_json::from_str(&json).unwrap();
        let mut fresh = ToyClassifier::new(ToyConfig { dim_bits: 12, ..Default::default() });
        fresh.restore(&back);
        for e in &data {
            assert_eq!(fresh.predict(e), m.predict(e));
        }
        assert_eq!(ToyClassifier::from_snapshot(&snap), m);
    }
}
