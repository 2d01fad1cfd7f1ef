use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use conjnli_core::srl::fusion::{read_embeddings, FitConfig, FusionHead};
use conjnli_core::srl::{constrained_viterbi, read_lattices, Decoded};
use conjnli_core::Label;
use serde::Serialize;
use tracing::info;

use crate::io::{read_json, write_json, write_jsonl};

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// JSON-lines {pieces, tagset, scores, wordpiece_map}.
    #[arg(long)]
    lattices: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DecodedRow {
    line: usize,
    #[serde(flatten)]
    decoded: Decoded,
}

pub fn decode(args: DecodeArgs) -> Result<()> {
    let lattices = read_lattices(&args.lattices)?;
    let mut rows = Vec::with_capacity(lattices.len());
    for (i, lattice) in lattices.iter().enumerate() {
        rows.push(DecodedRow { line: i + 1, decoded: constrained_viterbi(lattice)? });
    }
    write_jsonl(args.out.as_deref(), &rows)?;
    info!(lattices = rows.len(), "decoded");
    Ok(())
}

#[derive(Debug, Args)]
pub struct FusionTrainArgs {
    /// JSON-lines {id, c_nli, c_p, c_h, label}.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trained head (JSON).
    #[arg(long)]
    out: PathBuf,
}

pub fn fusion_train(args: FusionTrainArgs) -> Result<()> {
    let data = read_embeddings(&args.data)?;
    let Some(first) = data.first() else { bail!("{} holds no records", args.data.display()) };
    let mut head = FusionHead::random(first.c_nli.len(), first.c_p.len(), first.c_h.len(), args.seed);
    let config = FitConfig { epochs: args.epochs, learning_rate: args.lr, seed: args.seed };
    let losses = head.fit(&data, &config)?;
    info!(
        records = data.len(),
        final_loss = losses.last().copied().unwrap_or(f64::NAN),
        train_accuracy = head.accuracy(&data)?,
        "trained fusion head"
    );
    write_json(Some(&args.out), &head)
}

#[derive(Debug, Args)]
pub struct FusionEvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Report (JSON); stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct FusionReport {
    records: usize,
    accuracy: f64,
    confusion: [[usize; 3]; 3],
}

pub fn fusion_eval(args: FusionEvalArgs) -> Result<()> {
    let head: FusionHead = read_json(&args.model)?;
    let data = read_embeddings(&args.data)?;
    let mut confusion = [[0; 3]; 3];
    for r in &data {
        let p: Label = head.predict(&r.c_nli, &r.c_p, &r.c_h)?;
        confusion[r.label.index()][p.index()] += 1;
    }
    let report = FusionReport { records: data.len(), accuracy: head.accuracy(&data)?, confusion };
    write_json(args.report.as_deref(), &report)
}
