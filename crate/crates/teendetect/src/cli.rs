//! Command-line interface: ingest, lexicon, run, adapt, eval, report.
//!
//! Every command is deterministic given identical inputs and seeds and never
//! modifies its input files. Exit codes: 0 success, 1 validation failure,
//! 2 runtime failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::adaptation::{adapt_target, write_traces_csv, AdaptationState, Hyperparams};
use crate::concentrator::{build_lexicon, DEFAULT_CAPACITY};
use crate::config::RunConfig;
use crate::corpus::{dataset_stats, load_dataset, save_jsonl, Format, Platform};
use crate::encoder::{init_target_from_source, load_checkpoint, save_checkpoint};
use crate::error::{Error, Result};
use crate::evaluation::{macro_f1, table_from_csv};
use crate::heads::{Discriminator, DEFAULT_DISCRIMINATOR_HIDDEN};

#[derive(Debug, Parser)]
#[command(
    name = "teendetect",
    version,
    about = "Weakly supervised cross-platform teenager detection"
)]
pub struct Cli {
    /// Seed override (replaces config seeds / default seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path override.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run configuration file (used by `run`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw CSV/JSONL dump into canonical JSONL plus a stats report.
    Ingest(IngestArgs),
    /// Lexicon operations.
    Lexicon {
        #[command(subcommand)]
        command: LexiconCommand,
    },
    /// Execute the experiment grid described by a run configuration.
    Run,
    /// Adapt a source encoder checkpoint to an unlabelled target corpus.
    Adapt(AdaptArgs),
    /// Score a prediction file against gold labels.
    Eval(EvalArgs),
    /// Re-render the formatted results table from a results CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub format: Format,
    #[arg(long)]
    pub platform: Platform,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum LexiconCommand {
    /// Build an alignment lexicon from labelled corpora and optional
    /// external terms.
    Build(LexiconBuildArgs),
}

#[derive(Debug, Args)]
pub struct LexiconBuildArgs {
    /// Maximum number of lexicon entries.
    #[arg(long, default_value_t = DEFAULT_CAPACITY)]
    pub capacity: usize,
    /// Labelled corpus as platform=path, repeatable. Files must be canonical
    /// JSONL (see `ingest`).
    #[arg(long = "corpus", value_name = "PLATFORM=PATH")]
    pub corpora: Vec<String>,
    /// JSON file with externally curated [term, weight] pairs.
    #[arg(long)]
    pub external: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Source encoder checkpoint (see the run command's checkpoints/).
    #[arg(long)]
    pub source: PathBuf,
    /// Labelled source corpus, canonical JSONL.
    #[arg(long)]
    pub source_data: PathBuf,
    #[arg(long)]
    pub source_platform: Platform,
    /// Unlabelled target corpus, canonical JSONL.
    #[arg(long)]
    pub target_data: PathBuf,
    #[arg(long)]
    pub target_platform: Platform,
    /// Weight of the encoder-measurer KL term.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 4)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub encoder_lr: f64,
    #[arg(long, default_value_t = 2e-4)]
    pub head_lr: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions JSONL; each line needs at least {"id": ..., "label": 0|1}.
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold JSONL in the same shape (canonical corpus files qualify).
    #[arg(long)]
    pub gold: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// results.csv produced by the run command.
    #[arg(long)]
    pub results: PathBuf,
}

/// Runs the parsed command line; the binary maps errors onto exit codes.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => cmd_ingest(&args),
        Command::Lexicon {
            command: LexiconCommand::Build(args),
        } => cmd_lexicon_build(&args, cli.out.as_deref()),
        Command::Run => cmd_run(cli.config.as_deref(), cli.out.as_deref(), cli.seed),
        Command::Adapt(args) => cmd_adapt(&args, cli.out.as_deref(), cli.seed.unwrap_or(0)),
        Command::Eval(args) => cmd_eval(&args),
        Command::Report(args) => cmd_report(&args, cli.out.as_deref()),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let dataset = load_dataset(&args.input, args.format, args.platform.clone())?;
    save_jsonl(&dataset, &args.output)?;
    let stats = dataset_stats(&dataset)?;
    let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    write_file(&args.output.with_extension("stats.json"), stats_json.as_bytes())?;
    println!("{stats_json}");
    Ok(())
}

fn parse_corpus_arg(arg: &str) -> Result<(Platform, PathBuf)> {
    let (platform, path) = arg.split_once('=').ok_or_else(|| {
        Error::InvalidConfig(format!("--corpus must be PLATFORM=PATH, got {arg:?}"))
    })?;
    Ok((platform.parse()?, PathBuf::from(path)))
}

fn cmd_lexicon_build(args: &LexiconBuildArgs, out: Option<&Path>) -> Result<()> {
    let out = out.ok_or_else(|| {
        Error::InvalidConfig("lexicon build needs --out for the lexicon JSON".into())
    })?;
    let mut corpora = Vec::new();
    for arg in &args.corpora {
        let (platform, path) = parse_corpus_arg(arg)?;
        corpora.push(load_dataset(&path, Format::Jsonl, platform)?);
    }
    let external: Vec<(String, f64)> = match &args.external {
        Some(path) => serde_json::from_str(&read_file(path)?).map_err(|e| {
            Error::InvalidConfig(format!("external lexicon {}: {e}", path.display()))
        })?,
        None => Vec::new(),
    };
    let refs: Vec<&_> = corpora.iter().collect();
    let lexicon = build_lexicon(&external, &refs, args.capacity)?;
    lexicon.save(out)?;
    println!(
        "lexicon: {} entries (capacity {}) -> {}",
        lexicon.len(),
        args.capacity,
        out.display()
    );
    Ok(())
}

fn cmd_run(config: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let config_path = config
        .ok_or_else(|| Error::InvalidConfig("run needs --config <file>".into()))?;
    let mut config = RunConfig::load(config_path)?;
    config.apply_env_overrides()?;
    // command-line overrides win over both the file and the environment
    let seed_arg = seed.map(|s| s.to_string());
    config.apply_overrides(
        out.and_then(|p| p.to_str()),
        seed_arg.as_deref(),
    )?;
    let base_dir = config_path.parent().unwrap_or_else(|| Path::new("."));
    let output = crate::config::execute(&config, base_dir)?;
    print!("{}", read_file(&output.output_dir.join("table.txt"))?);
    println!(
        "{} cells ({} failed) -> {}",
        output.manifest.cells,
        output.manifest.failed_cells,
        output.output_dir.display()
    );
    Ok(())
}

fn cmd_adapt(args: &AdaptArgs, out: Option<&Path>, seed: u64) -> Result<()> {
    let out = out.ok_or_else(|| {
        Error::InvalidConfig("adapt needs --out for the adapted checkpoint".into())
    })?;
    let source = load_checkpoint(&args.source)?;
    let source_data = load_dataset(&args.source_data, Format::Jsonl, args.source_platform.clone())?;
    let target_data = load_dataset(&args.target_data, Format::Jsonl, args.target_platform.clone())?;
    let hp = Hyperparams {
        batch_size: args.batch_size,
        encoder_lr: args.encoder_lr,
        head_lr: args.head_lr,
        epochs: args.epochs,
        kl_weight: args.lambda,
        seed,
    };
    hp.validate()?;
    if args.epochs == 0 {
        // zero epochs adapt nothing: the output checkpoint is the input
        save_checkpoint(&source, out)?;
        write_traces_csv(&[], &out.with_extension("traces.csv"))?;
        println!("0 adaptation steps; checkpoint unchanged -> {}", out.display());
        return Ok(());
    }
    let target = init_target_from_source(&source);
    let discriminator = Discriminator::new(
        source.embedding_dim(),
        DEFAULT_DISCRIMINATOR_HIDDEN,
        seed ^ 2,
    );
    let state = AdaptationState::new(source, target, discriminator)?;
    let state = adapt_target(state, &source_data, &target_data, &hp)?;
    save_checkpoint(&state.target, out)?;
    let traces_path = out.with_extension("traces.csv");
    write_traces_csv(&state.traces, &traces_path)?;
    let last = state.traces.last().expect("epochs > 0 leaves traces");
    println!(
        "{} adaptation steps; final d_loss {:.4}, kl {:.3e} -> {}",
        state.traces.len(),
        last.d_loss,
        last.kl_loss,
        out.display()
    );
    Ok(())
}

/// Minimal labelled row for eval files: any JSONL whose lines carry id and
/// label, which canonical corpus files do.
#[derive(Debug, Deserialize)]
struct LabelledRow {
    id: String,
    label: u8,
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, u8>> {
    let content = read_file(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: LabelledRow = serde_json::from_str(line).map_err(|e| Error::MalformedRow {
            path: path.to_path_buf(),
            row: i + 1,
            reason: e.to_string(),
        })?;
        if map.insert(row.id.clone(), row.label).is_some() {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                row: i + 1,
                reason: format!("duplicate id {:?}", row.id),
            });
        }
    }
    if map.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    Ok(map)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let pred = read_labels(&args.pred)?;
    let gold = read_labels(&args.gold)?;
    let mut predictions = Vec::with_capacity(gold.len());
    let mut labels = Vec::with_capacity(gold.len());
    for (id, label) in &gold {
        let p = pred.get(id).ok_or_else(|| {
            Error::InvalidConfig(format!("prediction file has no row for id {id:?}"))
        })?;
        predictions.push(*p);
        labels.push(*label);
    }
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            predictions: pred.len(),
            labels: gold.len(),
        });
    }
    println!("macro_f1 {:.4}", macro_f1(&predictions, &labels)?);
    Ok(())
}

fn cmd_report(args: &ReportArgs, out: Option<&Path>) -> Result<()> {
    let table = table_from_csv(&read_file(&args.results)?)?;
    if let Some(out) = out {
        write_file(out, table.as_bytes())?;
    }
    print!("{table}");
    Ok(())
}
