//! Benchmark discovery, BM25 indexing and dataset emission.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mtbench_core::bm25::Bm25Index;
use mtbench_core::corpus::{
    load_testset, validate_against_registry, Registry, TrainingStore, Validation,
};
use mtbench_core::dataset::{
    build_cot_dataset, build_ft_dataset, build_hint_ft_g_dataset, emit_alpaca, mono_from_store,
    DatasetManifest, MixSpec, TrainingExample,
};
use mtbench_core::prompting::HintCatalog;
use mtbench_core::{LangPair, TestSet};
use serde::Serialize;

use crate::config::RunConfig;
use crate::exit::Exit;
use crate::parse_pair;

pub fn registry(cfg: &RunConfig) -> Result<Registry> {
    match &cfg.data.registry {
        Some(p) => Registry::load(p).map_err(Exit::config),
        None => Ok(Registry::bundled()),
    }
}

pub fn catalog(cfg: &RunConfig, pair: LangPair) -> Result<HintCatalog> {
    if let Some(dir) = &cfg.data.hints_dir {
        let path = dir.join(format!("{pair}.toml"));
        if path.exists() {
            return HintCatalog::load(&path).map_err(Exit::config);
        }
    }
    Ok(HintCatalog::for_pair(pair))
}

fn is_corpus_file(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e == "tsv" || e == "jsonl")
}

/// Test-set files per direction directory under `root`, sorted by path.
pub fn discover(root: &Path, pairs: &[LangPair]) -> Result<Vec<(LangPair, PathBuf)>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(root).with_context(|| format!("reading {}", root.display()))?;
    let mut dirs: Vec<PathBuf> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        let Some(pair) = dir
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse::<LangPair>().ok())
        else {
            continue;
        };
        if !pairs.is_empty() && !pairs.contains(&pair) {
            continue;
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .flatten()
            .map(|e| e.path())
            .filter(|p| is_corpus_file(p))
            .collect();
        files.sort();
        out.extend(files.into_iter().map(|f| (pair, f)));
    }
    Ok(out)
}

/// Loads the selected test sets of one direction; the file stem is both id and domain.
pub fn load_sets(cfg: &RunConfig, pair: LangPair, filter: &[String]) -> Result<Vec<TestSet>> {
    let root = cfg.bench_root().map_err(Exit::config)?;
    let mut sets = Vec::new();
    for (_, path) in discover(root, &[pair])? {
        let id = path
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        if filter.is_empty() || filter.contains(&id) {
            sets.push(load_testset(&path, pair, &id)?);
        }
    }
    for f in filter {
        if !sets.iter().any(|s| &s.id == f) {
            bail!("test set {f} not found under {}/{pair}", root.display());
        }
    }
    if sets.is_empty() {
        bail!("no test sets for {pair} under {}", root.display());
    }
    Ok(sets)
}

pub fn training_store(cfg: &RunConfig, pair: LangPair) -> Result<(TrainingStore, PathBuf)> {
    let dir = cfg
        .train_root()
        .map_err(Exit::config)?
        .join(pair.to_string());
    let store = TrainingStore::load_dir(&dir, pair)
        .with_context(|| format!("loading training data {}", dir.display()))?;
    Ok((store, dir))
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directions to ingest (default: every direction directory found).
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pairs: Vec<LangPair>,
    /// Manifest path (default: `{work_dir}/manifest.json`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    lang_pair: LangPair,
    id: String,
    path: String,
    segments: usize,
    in_domain: Option<bool>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<usize>,
}

#[derive(Debug, Serialize)]
struct BenchManifest {
    root: String,
    entries: Vec<ManifestEntry>,
    /// Registered test sets with no file, per direction ingested.
    missing: Vec<String>,
    problems: usize,
}

pub fn ingest(cfg: &RunConfig, args: IngestArgs) -> Result<()> {
    let root = cfg.bench_root().map_err(Exit::config)?;
    let reg = registry(cfg)?;
    let files = discover(root, &args.pairs)?;
    if files.is_empty() {
        return Err(Exit::config(format!(
            "no test-set files under {}",
            root.display()
        )));
    }
    let mut entries = Vec::new();
    let mut seen: BTreeSet<(LangPair, String)> = BTreeSet::new();
    for (pair, path) in &files {
        let id = path
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let ts = load_testset(path, *pair, &id)?;
        let (status, expected, in_domain) = match validate_against_registry(&ts, &reg) {
            Ok(Validation::Ok) => ("ok", None, reg.get(*pair, &id).map(|e| e.in_domain)),
            Ok(Validation::SizeMismatch { expected, .. }) => (
                "size-mismatch",
                Some(expected),
                reg.get(*pair, &id).map(|e| e.in_domain),
            ),
            Err(_) => ("unregistered", None, None),
        };
        seen.insert((*pair, id.clone()));
        entries.push(ManifestEntry {
            lang_pair: *pair,
            id,
            path: path.display().to_string(),
            segments: ts.len(),
            in_domain,
            status,
            expected,
        });
    }
    let pairs: BTreeSet<LangPair> = files.iter().map(|(p, _)| *p).collect();
    let mut missing = Vec::new();
    for pair in pairs {
        for (id, _) in reg.entries_for(pair) {
            if !seen.contains(&(pair, id.to_string())) {
                missing.push(format!("{pair}/{id}"));
            }
        }
    }
    let problems = entries.iter().filter(|e| e.status != "ok").count();
    let manifest = BenchManifest {
        root: root.display().to_string(),
        entries,
        missing,
        problems,
    };
    let out = args
        .out
        .unwrap_or_else(|| cfg.work_dir.join("manifest.json"));
    write_json(&out, &manifest)?;
    for e in manifest.entries.iter().filter(|e| e.status != "ok") {
        eprintln!(
            "warning: {}/{}: {}{}",
            e.lang_pair,
            e.id,
            e.status,
            e.expected
                .map(|x| format!(" (expected {x}, got {})", e.segments))
                .unwrap_or_default()
        );
    }
    println!(
        "{} test sets, {} problems, manifest {}",
        manifest.entries.len(),
        problems,
        out.display()
    );
    if cfg.strict && problems > 0 {
        return Err(Exit::validation(format!(
            "{problems} test sets failed registry validation"
        )));
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long, value_parser = parse_pair)]
    pair: LangPair,
    /// Index path (default: `{work_dir}/index/{pair}.json`).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn index_path(cfg: &RunConfig, pair: LangPair) -> PathBuf {
    cfg.work_dir.join("index").join(format!("{pair}.json"))
}

pub fn index(cfg: &RunConfig, args: IndexArgs) -> Result<()> {
    let (store, _) = training_store(cfg, args.pair)?;
    let idx = Bm25Index::with_defaults(store.all_pairs())?;
    let out = args.out.unwrap_or_else(|| index_path(cfg, args.pair));
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    idx.save(&out)?;
    println!(
        "indexed {} pairs, avgdl {:.2}, {}",
        idx.len(),
        idx.avgdl(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct FtArgs {
    #[arg(long, value_parser = parse_pair)]
    pair: LangPair,
    /// Domains to sample (default: `datasets.ft_domains`, else every training domain).
    #[arg(long, value_delimiter = ',')]
    domains: Vec<String>,
    /// Pairs per domain (default: `datasets.per_domain`).
    #[arg(long)]
    per_domain: Option<usize>,
    /// Output file (default: `{work_dir}/datasets/{pair}/ft.json`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn ft_examples(
    cfg: &RunConfig,
    store: &TrainingStore,
    domains: Vec<String>,
    per_domain: Option<usize>,
) -> Result<Vec<TrainingExample>> {
    let domains = if !domains.is_empty() {
        domains
    } else if !cfg.datasets.ft_domains.is_empty() {
        cfg.datasets.ft_domains.clone()
    } else {
        store.domains().map(str::to_string).collect()
    };
    let per_domain = per_domain.unwrap_or(cfg.datasets.per_domain);
    Ok(build_ft_dataset(store, &domains, per_domain, cfg.seed)?)
}

fn emit(
    kind: &str,
    cfg: &RunConfig,
    pair: LangPair,
    alpha: Option<f64>,
    examples: &[TrainingExample],
    sources: &[PathBuf],
    out: Option<PathBuf>,
) -> Result<()> {
    let out = out.unwrap_or_else(|| {
        cfg.work_dir
            .join("datasets")
            .join(pair.to_string())
            .join(format!("{kind}.json"))
    });
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    emit_alpaca(examples, &out)?;
    let manifest = DatasetManifest::new(kind, pair, cfg.seed, alpha, examples, sources)?;
    let manifest_path = out.with_extension("manifest.json");
    manifest.write(&manifest_path)?;
    println!(
        "{} examples -> {} (manifest {})",
        examples.len(),
        out.display(),
        manifest_path.display()
    );
    Ok(())
}

pub fn build_ft(cfg: &RunConfig, args: FtArgs) -> Result<()> {
    let (store, dir) = training_store(cfg, args.pair)?;
    let examples = ft_examples(cfg, &store, args.domains, args.per_domain)?;
    emit("ft", cfg, args.pair, None, &examples, &[dir], args.out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CotVariant {
    /// Hint-embedded translation plus hint-generation examples.
    Cot,
    /// Hint-embedded translation only.
    HintFtG,
}

#[derive(Debug, Args)]
pub struct CotArgs {
    #[arg(long, value_parser = parse_pair)]
    pair: LangPair,
    #[arg(long, value_enum, default_value = "cot")]
    variant: CotVariant,
    /// Hint-task share of the translation count (default: `datasets.alpha`).
    #[arg(long)]
    alpha: Option<f64>,
    /// Domains of the hint-generation examples (default: `datasets.hint_domains`,
    /// else every training domain with a training hint).
    #[arg(long, value_delimiter = ',')]
    hint_domains: Vec<String>,
    /// Translation domains (default as for `build-ft-data`).
    #[arg(long, value_delimiter = ',')]
    domains: Vec<String>,
    #[arg(long)]
    per_domain: Option<usize>,
    /// Output file (default: `{work_dir}/datasets/{pair}/{variant}.json`).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn build_cot(cfg: &RunConfig, args: CotArgs) -> Result<()> {
    let (store, dir) = training_store(cfg, args.pair)?;
    let catalog = catalog(cfg, args.pair)?;
    let alpha = args.alpha.unwrap_or(cfg.datasets.alpha);
    if args.variant == CotVariant::Cot && !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Exit::config(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let translation = ft_examples(cfg, &store, args.domains, args.per_domain)?;
    match args.variant {
        CotVariant::HintFtG => {
            let examples = build_hint_ft_g_dataset(&translation, &catalog)?;
            emit(
                "hint-ft-g",
                cfg,
                args.pair,
                None,
                &examples,
                &[dir],
                args.out,
            )
        }
        CotVariant::Cot => {
            let hint_domains = if !args.hint_domains.is_empty() {
                args.hint_domains
            } else if !cfg.datasets.hint_domains.is_empty() {
                cfg.datasets.hint_domains.clone()
            } else {
                store
                    .domains()
                    .filter(|d| catalog.training_hint(d).is_ok())
                    .map(str::to_string)
                    .collect()
            };
            let mix = MixSpec {
                alpha,
                hint_domains,
                seed: cfg.seed,
            };
            mix.validate().map_err(Exit::config)?;
            let mono = mono_from_store(&store);
            let examples = build_cot_dataset(&translation, &catalog, &mix, &mono, args.pair)?;
            emit(
                "cot",
                cfg,
                args.pair,
                Some(mix.alpha),
                &examples,
                &[dir],
                args.out,
            )
        }
    }
}
