use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

mod eval;
mod io;
mod pipeline;
mod srl;
mod train;

/// Conjunctive NLI toolkit: coordination extraction, pair generation and
/// labeling, adversarial fine-tuning, constrained SRL decoding, evaluation
/// and the annotation service.
#[derive(Debug, Parser)]
#[command(name = "conjnli", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List coordinations found in a treebank.
    Extract(pipeline::ExtractArgs),
    /// Generate premise/hypothesis pairs by editing conjuncts.
    Generate(pipeline::GenerateArgs),
    /// Label pairs with the boolean and non-boolean heuristics.
    Label(pipeline::LabelArgs),
    /// Sample a set balanced over and/or/but.
    BuildAdv(pipeline::BuildAdvArgs),
    /// Write a synthetic treebank, its lexicon or a conflict task.
    Synth(pipeline::SynthArgs),
    /// Fine-tune the toy classifier with IAFT (or plain AFT).
    TrainIaft(train::TrainArgs),
    /// Hypothesis-only leakage probe.
    Probe(train::ProbeArgs),
    /// Constrained Viterbi over tag lattices.
    SrlDecode(srl::DecodeArgs),
    /// Train the NLI+SRL fusion head on precomputed embeddings.
    FusionTrain(srl::FusionTrainArgs),
    /// Score a trained fusion head.
    FusionEval(srl::FusionEvalArgs),
    /// Accuracy overall and per phenomenon.
    Eval(eval::EvalArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory holding one journal per session.
    #[arg(long, default_value = "journals")]
    data_dir: PathBuf,
    /// Browser client files.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn serve(args: ServeArgs) -> Result<()> {
    let store = Arc::new(conjnli_annotate::Store::open(&args.data_dir)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(conjnli_annotate::serve(args.addr, store, args.static_dir))?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();
    match Cli::parse().command {
        Command::Extract(a) => pipeline::extract(a),
        Command::Generate(a) => pipeline::generate(a),
        Command::Label(a) => pipeline::label(a),
        Command::BuildAdv(a) => pipeline::build_adv(a),
        Command::Synth(a) => pipeline::synth(a),
        Command::TrainIaft(a) => train::train_iaft(a),
        Command::Probe(a) => train::probe(a),
        Command::SrlDecode(a) => srl::decode(a),
        Command::FusionTrain(a) => srl::fusion_train(a),
        Command::FusionEval(a) => srl::fusion_eval(a),
        Command::Eval(a) => eval::eval(a),
        Command::Serve(a) => serve(a),
    }
}
