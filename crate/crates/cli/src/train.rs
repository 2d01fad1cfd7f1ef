use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use conjnli_core::iaft::{
    accuracy, aft_train, hypothesis_only_train, iaft_train, Classifier, EvalSet, Example, ToyClassifier, ToyConfig,
    TrainSchedule,
};
use conjnli_core::Label;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tracing::info;

use crate::io::{read_jsonl, write_json};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Iaft,
    Aft,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Base training set, JSON-lines {premise, hypothesis, label}.
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    adv: PathBuf,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Iaft)]
    method: Method,
    /// Sample base examples from the whole set, not only conjunctive ones.
    #[arg(long)]
    no_conjunction_filter: bool,
    /// Extra evaluation sets as NAME=PATH, scored after every epoch.
    #[arg(long = "eval", value_parser = parse_named)]
    evals: Vec<(String, PathBuf)>,
    /// Epoch log (JSON); stdout when omitted.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Final model weights (JSON).
    #[arg(long)]
    model: Option<PathBuf>,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

pub fn train_iaft(args: TrainArgs) -> Result<()> {
    let base: Vec<Example> = read_jsonl(&args.base)?;
    let adv: Vec<Example> = read_jsonl(&args.adv)?;
    let mut named = Vec::new();
    for (name, path) in &args.evals {
        named.push((name.clone(), read_jsonl::<Example>(path)?));
    }
    let evals: Vec<EvalSet> = named.iter().map(|(n, e)| EvalSet { name: n, examples: e }).collect();

    let mut model = ToyClassifier::new(ToyConfig::default());
    model.fit(&base);
    info!(base = base.len(), acc = accuracy(&model, &base), "fitted on base");
    let log = match args.method {
        Method::Iaft => {
            let schedule = TrainSchedule {
                num_epochs: args.epochs,
                seed: args.seed,
                conjunction_filter: !args.no_conjunction_filter,
            };
            iaft_train(&mut model, &base, &adv, &schedule, &evals)?
        }
        Method::Aft => aft_train(&mut model, &adv, args.epochs, &evals)?,
    };
    for e in &log.epochs {
        info!(epoch = e.epoch, pool = e.pool_size, metrics = ?e.metrics, "epoch done");
    }
    write_json(args.log.as_deref(), &log)?;
    if let Some(path) = &args.model {
        write_json(Some(path), &model.snapshot())?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Labeled pairs, JSON-lines with premise, hypothesis and label.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    /// Fraction held out for scoring.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    /// Downsample every label to the size of the rarest one.
    #[arg(long)]
    balance: bool,
    /// Permute labels across examples before training.
    #[arg(long)]
    shuffle_labels: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ProbeReport {
    pub examples: usize,
    pub train: usize,
    pub test: usize,
    pub balanced: bool,
    pub shuffled_labels: bool,
    pub label_counts: [usize; 3],
    /// Accuracy of always predicting the most frequent training label.
    pub majority_rate: f64,
    pub hypothesis_only_accuracy: f64,
    pub full_input_accuracy: f64,
}

fn label_counts(data: &[Example]) -> [usize; 3] {
    let mut c = [0; 3];
    for e in data {
        c[e.label.index()] += 1;
    }
    c
}

pub fn probe(args: ProbeArgs) -> Result<()> {
    if !(0.0..1.0).contains(&args.holdout) || args.holdout == 0.0 {
        bail!("--holdout must be in (0, 1)");
    }
    let mut data: Vec<Example> = read_jsonl(&args.data).context("loading probe data")?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    if args.balance {
        let n = *label_counts(&data).iter().min().unwrap();
        let mut kept = Vec::with_capacity(3 * n);
        for label in Label::ALL {
            let mut group: Vec<Example> = data.iter().filter(|e| e.label == label).cloned().collect();
            group.shuffle(&mut rng);
            kept.extend(group.into_iter().take(n));
        }
        data = kept;
    }
    if args.shuffle_labels {
        let mut labels: Vec<Label> = data.iter().map(|e| e.label).collect();
        labels.shuffle(&mut rng);
        for (e, l) in data.iter_mut().zip(labels) {
            e.label = l;
        }
    }
    data.shuffle(&mut rng);
    let test_len = ((data.len() as f64) * args.holdout).round() as usize;
    if test_len == 0 || test_len == data.len() {
        bail!("{} examples are too few to split", data.len());
    }
    let (test, train) = data.split_at(test_len);

    let config = ToyConfig { epochs: args.epochs, ..ToyConfig::default() };
    let hyp = hypothesis_only_train(ToyClassifier::new(config.clone()), train, args.epochs)?;
    let mut full = ToyClassifier::new(config);
    full.fit(train);
    let counts = label_counts(train);
    let best = Label::ALL[(0..3).max_by_key(|&i| counts[i]).unwrap()];
    let report = ProbeReport {
        examples: data.len(),
        train: train.len(),
        test: test.len(),
        balanced: args.balance,
        shuffled_labels: args.shuffle_labels,
        label_counts: label_counts(&data),
        majority_rate: test.iter().filter(|e| e.label == best).count() as f64 / test.len() as f64,
        hypothesis_only_accuracy: accuracy(&hyp, test),
        full_input_accuracy: accuracy(&full, test),
    };
    info!(hypothesis_only = report.hypothesis_only_accuracy, full_input = report.full_input_accuracy, "probe finished");
    write_json(args.report.as_deref(), &report)
}
