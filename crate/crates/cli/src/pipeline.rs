use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use conjnli_core::labeler::{label_with_rule, HeuristicConfig, Rule};
use conjnli_core::pairgen::{generate_corpus, GenerationConfig};
use conjnli_core::srl::fusion::synthetic_embeddings;
use conjnli_core::synth::{conflict_task, synth_corpus, synth_lexicon, SynthConfig};
use conjnli_core::treebank::read_trees;
use conjnli_core::{
    build_adversarial_set, find_coordinations, CoordinationInstance, FeatureLexicons, LabelSource, NliPair,
};
use serde::Serialize;
use tracing::{info, warn};

use crate::io::{read_json, read_jsonl, write_json, write_jsonl};

fn features(path: Option<&Path>) -> Result<FeatureLexicons> {
    match path {
        Some(p) => FeatureLexicons::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(FeatureLexicons::default()),
    }
}

fn heuristics(path: Option<&Path>) -> Result<HeuristicConfig> {
    let config: HeuristicConfig = match path {
        Some(p) => read_json(p)?,
        None => HeuristicConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// One bracketed parse per line.
    #[arg(long)]
    trees: PathBuf,
    /// Whitespace-separated NER tags aligned with the tree leaves.
    #[arg(long)]
    ner: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ExtractRow<'a> {
    source_id: &'a str,
    sentence: String,
    #[serde(flatten)]
    instance: &'a CoordinationInstance,
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let records = read_trees(&args.trees, args.ner.as_deref())?;
    let mut rows = Vec::new();
    for rec in &records {
        let coords = find_coordinations(&rec.tree, &rec.sentence)
            .with_context(|| format!("sentence {}", rec.sentence.source_id))?;
        for w in &coords.warnings {
            warn!(source = %rec.sentence.source_id, conj = w.conj_index, "{}", w.message);
        }
        let text = rec.sentence.text();
        rows.extend(coords.instances.into_iter().map(|c| (rec.sentence.source_id.clone(), text.clone(), c)));
    }
    let out: Vec<ExtractRow> =
        rows.iter().map(|(id, text, c)| ExtractRow { source_id: id, sentence: text.clone(), instance: c }).collect();
    let n = write_jsonl(args.out.as_deref(), &out)?;
    info!(sentences = records.len(), instances = n, "extracted coordinations");
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    trees: PathBuf,
    #[arg(long)]
    ner: Option<PathBuf>,
    /// JSON object with `antonyms`, `co_hyponyms` and `name_pool`.
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quantifier and negation word lists (JSON).
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let records = read_trees(&args.trees, args.ner.as_deref())?;
    let lexicon = conjnli_core::ReplacementLexicon::load(&args.lexicon)?;
    let config = GenerationConfig { seed: args.seed, features: features(args.features.as_deref())? };
    let generated = generate_corpus(&records, &lexicon, &config);
    for w in &generated.warnings {
        warn!(source = %w.source_id, "{}", w.message);
    }
    let n = write_jsonl(args.out.as_deref(), &generated.pairs)?;
    info!(sentences = records.len(), pairs = n, warnings = generated.warnings.len(), "generated pairs");
    Ok(())
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// Heuristic configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Discard labels already present in the input.
    #[arg(long)]
    relabel: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn label(args: LabelArgs) -> Result<()> {
    let config = heuristics(args.config.as_deref())?;
    let mut pairs: Vec<NliPair> = read_jsonl(&args.pairs)?;
    let mut fired: BTreeMap<Rule, usize> = BTreeMap::new();
    for p in pairs.iter_mut() {
        if args.relabel {
            p.clear_label();
        }
        if p.label.is_none() {
            let (label, rule) = label_with_rule(p, &config);
            p.set_label(label, LabelSource::Heuristic);
            *fired.entry(rule).or_default() += 1;
        }
    }
    write_jsonl(args.out.as_deref(), &pairs)?;
    info!(pairs = pairs.len(), rules = ?fired, "labeled pairs");
    Ok(())
}

#[derive(Debug, Args)]
pub struct BuildAdvArgs {
    /// Candidate pairs; unlabeled ones are labeled on the fly.
    #[arg(long)]
    pairs: PathBuf,
    /// Total size; must be a multiple of 3.
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Label x bucket counts of the selected set.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn build_adv(args: BuildAdvArgs) -> Result<()> {
    let config = heuristics(args.config.as_deref())?;
    let pool: Vec<NliPair> = read_jsonl(&args.pairs)?;
    let set = build_adversarial_set(&pool, &config, args.size, args.seed)?;
    write_jsonl(args.out.as_deref(), &set.pairs)?;
    if let Some(path) = &args.report {
        write_json(Some(path), &set.report)?;
    }
    info!(pool = pool.len(), selected = set.pairs.len(), buckets = ?set.report.per_bucket, "built adversarial set");
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    sentences: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    trigger_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    entity_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    negation_rate: f64,
    /// Bracketed trees, one per line.
    #[arg(long)]
    trees: Option<PathBuf>,
    /// NER tags aligned with `--trees`.
    #[arg(long)]
    ner: Option<PathBuf>,
    /// Replacement lexicon covering the synthetic vocabulary.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Write a base/adversarial conflict task (train and eval splits) here.
    #[arg(long)]
    conflict_dir: Option<PathBuf>,
    /// Write synthetic fusion-head embeddings (one record per sentence) here.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

pub fn synth(args: SynthArgs) -> Result<()> {
    if args.trees.is_none() && args.lexicon.is_none() && args.conflict_dir.is_none() && args.embeddings.is_none() {
        bail!("nothing to write: pass --trees, --lexicon, --conflict-dir or --embeddings");
    }
    if let Some(path) = &args.embeddings {
        write_jsonl(Some(path), &synthetic_embeddings(args.sentences, 32, 16, args.seed))?;
    }
    if let Some(path) = &args.trees {
        let config = SynthConfig {
            sentences: args.sentences,
            seed: args.seed,
            trigger_rate: args.trigger_rate,
            entity_rate: args.entity_rate,
            negation_rate: args.negation_rate,
        };
        let corpus = synth_corpus(&config);
        let trees: String = corpus.iter().map(|s| format!("{}\n", s.bracketed)).collect();
        std::fs::write(path, trees).with_context(|| format!("writing {}", path.display()))?;
        if let Some(ner) = &args.ner {
            let tags: String = corpus.iter().map(|s| format!("{}\n", s.ner.join(" "))).collect();
            std::fs::write(ner, tags).with_context(|| format!("writing {}", ner.display()))?;
        }
        info!(sentences = corpus.len(), "wrote synthetic treebank");
    }
    if let Some(path) = &args.lexicon {
        write_json(Some(path), &synth_lexicon())?;
    }
    if let Some(dir) = &args.conflict_dir {
        std::fs::create_dir_all(dir)?;
        let task = conflict_task(args.seed, args.sentences, args.sentences / 2);
        for (name, data) in [
            ("base.jsonl", &task.base_train),
            ("base_eval.jsonl", &task.base_eval),
            ("adv.jsonl", &task.adv_train),
            ("adv_eval.jsonl", &task.adv_eval),
        ] {
            write_jsonl(Some(&dir.join(name)), data)?;
        }
        info!(
            base = task.base_train.len(),
            adv = task.adv_train.len(),
            dir = %dir.display(),
            "wrote conflict task"
        );
    }
    Ok(())
}
