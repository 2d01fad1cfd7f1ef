use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use conjnli_core::evalkit::{evaluate, load_dataset, load_predictions};
use conjnli_core::FeatureLexicons;
use tracing::info;

use crate::io::write_json;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold dataset: JSON-lines, or `.tsv` with premise, hypothesis, label.
    #[arg(long)]
    gold: PathBuf,
    /// JSON-lines {id, label}.
    #[arg(long)]
    pred: PathBuf,
    /// Report (JSON); stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-bucket accuracy table (Markdown).
    #[arg(long)]
    report_md: Option<PathBuf>,
    /// Quantifier and negation word lists (JSON).
    #[arg(long)]
    features: Option<PathBuf>,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let lex = match &args.features {
        Some(p) => FeatureLexicons::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => FeatureLexicons::default(),
    };
    let gold = load_dataset(&args.gold, None)?;
    let preds = load_predictions(&args.pred)?;
    let report = evaluate(&preds, &gold, &lex)?;
    info!(total = report.total, accuracy = report.accuracy, "evaluated");
    write_json(args.report.as_deref(), &report)?;
    if let Some(path) = &args.report_md {
        std::fs::write(path, report.to_markdown()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
