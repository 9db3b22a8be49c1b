//! `score`, `report` and `tally-human`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mtbench_core::analysis::{
    aggregate, tally_human_eval, DomainScore, EvalReport, Judgment, RunReport,
};
use mtbench_core::bleu::{corpus_bleu, signature, BleuConfig};
use mtbench_core::LangPair;
use mtbench_infer::pipelines::read_records;
use mtbench_infer::{ScoreItem, ScoreMode, ScorerClient};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{registry, write_json};
use crate::exit::Exit;
use crate::parse_pair;

/// COMET scores are reported ×100.
pub const COMET_SCALE: f64 = 100.0;

#[derive(Debug, Serialize, Deserialize)]
pub struct SystemScores {
    pub bleu: EvalReport,
    pub comet: Option<EvalReport>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Systems to score (default: every system with records).
    #[arg(long, value_delimiter = ',')]
    systems: Vec<String>,
    /// Directions to score (default: every direction with records).
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pairs: Vec<LangPair>,
    /// Skip COMET even when a scorer is configured.
    #[arg(long)]
    no_comet: bool,
}

fn subdirs(dir: &Path) -> Result<Vec<String>> {
    let mut out: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .flatten()
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    out.sort();
    Ok(out)
}

fn record_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn score(cfg: &RunConfig, args: ScoreArgs) -> Result<()> {
    let records_dir = cfg.records_dir();
    if !records_dir.exists() {
        bail!("no records under {}", records_dir.display());
    }
    let reg = registry(cfg)?;
    let systems = if args.systems.is_empty() {
        subdirs(&records_dir)?
    } else {
        args.systems
    };
    let scorer = match (&cfg.scorer, args.no_comet) {
        (Some(s), false) => {
            Some(ScorerClient::new(&s.url, s.batch_size, s.timeout_secs).map_err(Exit::config)?)
        }
        _ => None,
    };
    let rt = tokio::runtime::Runtime::new()?;
    for system in &systems {
        let sys_dir = records_dir.join(system);
        if !sys_dir.is_dir() {
            bail!(
                "no records for system {system} under {}",
                records_dir.display()
            );
        }
        let pairs: Vec<LangPair> = if args.pairs.is_empty() {
            subdirs(&sys_dir)?
                .iter()
                .filter_map(|p| p.parse().ok())
                .collect()
        } else {
            args.pairs.clone()
        };
        for pair in pairs {
            let files = record_files(&sys_dir.join(pair.to_string())).unwrap_or_default();
            if files.is_empty() {
                bail!("no record files for {system} {pair}");
            }
            let mut bleu_cfg = BleuConfig::for_target(pair.tgt());
            bleu_cfg.lowercase = cfg.metrics.lowercase;
            let (mut bleu_scores, mut comet_scores, mut comet_model) =
                (Vec::new(), Vec::new(), String::new());
            for file in files {
                let id = file
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let records = read_records(&file)?;
                if records.is_empty() {
                    bail!("{} has no records", file.display());
                }
                let failed = records.iter().filter(|r| !r.is_ok()).count();
                if failed > 0 {
                    eprintln!(
                        "warning: {system} {pair}/{id}: {failed} failed segments scored as empty"
                    );
                }
                let in_domain = match reg.get(pair, &id) {
                    Some(e) => e.in_domain,
                    None => {
                        eprintln!(
                            "warning: {pair}/{id} is not registered; counted as out-of-domain"
                        );
                        false
                    }
                };
                let hyps: Vec<&str> = records.iter().map(|r| r.hypothesis.as_str()).collect();
                let refs: Vec<&str> = records.iter().map(|r| r.reference.as_str()).collect();
                let bleu = corpus_bleu(&hyps, &refs, &bleu_cfg)?;
                let mk = |metric: &str, value: f64| DomainScore {
                    test_set: id.clone(),
                    domain: id.clone(),
                    metric: metric.to_string(),
                    value,
                    n_segments: records.len(),
                    in_domain,
                };
                bleu_scores.push(mk("BLEU", bleu.score));
                if let Some(s) = &scorer {
                    let items: Vec<ScoreItem> = records
                        .iter()
                        .map(|r| ScoreItem {
                            src: r.source.clone(),
                            mt: r.hypothesis.clone(),
                            reference: Some(r.reference.clone()),
                        })
                        .collect();
                    let out = rt
                        .block_on(s.score(&items, ScoreMode::Reference))
                        .with_context(|| format!("COMET for {system} {pair}/{id}"))?;
                    comet_model = out.model_id;
                    comet_scores.push(mk("COMET", out.system_score.unwrap_or(0.0) * COMET_SCALE));
                }
            }
            let bleu = aggregate(system, pair, bleu_scores, &signature(&bleu_cfg, 1))?;
            let comet = if scorer.is_some() {
                Some(aggregate(
                    system,
                    pair,
                    comet_scores,
                    &format!("COMET|model:{comet_model}|scale:x100"),
                )?)
            } else {
                None
            };
            let out = cfg.scores_dir().join(system).join(format!("{pair}.json"));
            println!(
                "{system} {pair}: BLEU {:.2}{}",
                bleu.direction_avg,
                comet
                    .as_ref()
                    .map(|c| format!(", COMET {:.2}", c.direction_avg))
                    .unwrap_or_default()
            );
            write_json(&out, &SystemScores { bleu, comet })?;
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Systems to include (default: every scored system).
    #[arg(long, value_delimiter = ',')]
    systems: Vec<String>,
    /// Output directory (default: `{work_dir}/report`).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn report(cfg: &RunConfig, args: ReportArgs) -> Result<()> {
    let dir = cfg.scores_dir();
    if !dir.exists() {
        bail!("no scores under {}; run `score` first", dir.display());
    }
    let systems = if args.systems.is_empty() {
        subdirs(&dir)?
    } else {
        args.systems
    };
    let (mut bleu, mut comet) = (Vec::new(), Vec::new());
    for system in &systems {
        let sys_dir = dir.join(system);
        let mut files: Vec<PathBuf> = fs::read_dir(&sys_dir)
            .with_context(|| format!("no scores for {system}"))?
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        for f in files {
            let s: SystemScores = serde_json::from_str(&fs::read_to_string(&f)?)
                .with_context(|| format!("parsing {}", f.display()))?;
            bleu.push(s.bleu);
            comet.extend(s.comet);
        }
    }
    if bleu.is_empty() {
        bail!("no score files found under {}", dir.display());
    }
    let comet = (!comet.is_empty()).then_some(comet);
    let report = RunReport::build(bleu, comet);
    let out = args.out.unwrap_or_else(|| cfg.work_dir.join("report"));
    report.write_all(&out)?;
    print!("{}", report.to_table());
    println!("report written to {}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TallyArgs {
    /// One judgment per line (`win`, `lose`/`loss` or `tie`); in CSV lines the last field counts.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "")]
    label: String,
    /// Also write the tally as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn tally(args: TallyArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut judgments = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line);
        match field.parse::<Judgment>() {
            Ok(j) => judgments.push(j),
            // A header row is allowed on the first line only.
            Err(_) if i == 0 && judgments.is_empty() => continue,
            Err(e) => return Err(Exit::validation(format!("line {}: {e}", i + 1))),
        }
    }
    let label = if args.label.is_empty() {
        args.input
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned()
    } else {
        args.label
    };
    let t = tally_human_eval(&judgments, &label).map_err(Exit::validation)?;
    if let Some(out) = &args.out {
        write_json(out, &t)?;
    }
    println!(
        "{}: n={} win {} ({:.1}%) lose {} ({:.1}%) tie {} ({:.1}%)",
        t.label, t.total, t.win, t.win_pct, t.lose, t.lose_pct, t.tie, t.tie_pct
    );
    Ok(())
}
