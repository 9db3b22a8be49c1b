//! `mtbench`: ingest, index, build datasets, translate, score and report.

mod config;
mod data;
mod exit;
mod report;
mod translate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mtbench_core::LangPair;
use mtbench_infer::PipelineMode;

use crate::config::RunConfig;
use crate::exit::Exit;

#[derive(Debug, Parser)]
#[command(
    name = "mtbench",
    version,
    about = "Multi-domain MT benchmarking harness"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `work_dir`.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// Overrides `cache_dir`.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Overrides `concurrency`.
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat validation warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan the benchmark tree and write a validated manifest.
    Ingest(data::IngestArgs),
    /// Build the BM25 index over a direction's training data.
    Index(data::IndexArgs),
    /// Emit the plain fine-tuning dataset (Alpaca JSON plus manifest).
    BuildFtData(data::FtArgs),
    /// Emit the hint-mixed fine-tuning dataset.
    BuildCotData(data::CotArgs),
    /// Run an inference pipeline over test sets.
    Translate(translate::TranslateArgs),
    /// Score translation records (BLEU, plus COMET when a scorer is configured).
    Score(report::ScoreArgs),
    /// Build report files from scores.
    Report(report::ReportArgs),
    /// Tally win/lose/tie human judgments.
    TallyHuman(report::TallyArgs),
}

pub fn parse_pair(s: &str) -> Result<LangPair, String> {
    s.parse::<LangPair>().map_err(|e| e.to_string())
}

pub fn parse_mode(s: &str) -> Result<PipelineMode, String> {
    s.parse::<PipelineMode>().map_err(|e| e.to_string())
}

fn load_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path).map_err(Exit::config)?,
        None => RunConfig::default(),
    };
    if let Some(w) = &g.work_dir {
        cfg.work_dir = w.clone();
    }
    if let Some(c) = &g.cache_dir {
        cfg.cache_dir = Some(c.clone());
    }
    if let Some(n) = g.concurrency {
        cfg.concurrency = n;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.strict |= g.strict;
    cfg.validate().map_err(Exit::config)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Ingest(a) => data::ingest(&cfg, a),
        Command::Index(a) => data::index(&cfg, a),
        Command::BuildFtData(a) => data::build_ft(&cfg, a),
        Command::BuildCotData(a) => data::build_cot(&cfg, a),
        Command::Translate(a) => translate::translate(&cfg, a),
        Command::Score(a) => report::score(&cfg, a),
        Command::Report(a) => report::report(&cfg, a),
        Command::TallyHuman(a) => report::tally(a),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_of(&e))
        }
    }
}
