//! `translate`: run one pipeline mode over a direction's test sets.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use mtbench_core::bm25::Bm25Index;
use mtbench_core::corpus::read_pairs;
use mtbench_core::prompting::PromptTemplate;
use mtbench_core::{LangPair, SegmentPair};
use mtbench_infer::pipelines::{
    read_records, record_path, run_bm25_shot, run_cot_auto, run_cot_given, run_cot_random,
    run_direct, run_fewshot, run_maps_lite, write_records,
};
use mtbench_infer::{Orchestrator, PipelineMode, ResponseCache, ScorerClient, TranslationRecord};

use crate::config::RunConfig;
use crate::data::{catalog, index_path, load_sets, training_store};
use crate::exit::{Exit, INFERENCE};
use crate::{parse_mode, parse_pair};

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// System id; names the record directory.
    #[arg(long)]
    system: String,
    /// One of: direct, few-shot, bm25-shot, cot-auto, cot-given, cot-random, maps-lite.
    #[arg(long, value_parser = parse_mode)]
    mode: PipelineMode,
    #[arg(long, value_parser = parse_pair)]
    pair: LangPair,
    /// Test-set ids (default: all under the direction directory).
    #[arg(long, value_delimiter = ',')]
    test_sets: Vec<String>,
    /// Endpoint name in the config (default: the system id).
    #[arg(long)]
    endpoint: Option<String>,
    /// Bundled template family for direct/few-shot/bm25-shot.
    #[arg(long)]
    template: Option<String>,
    /// Template file; overrides `--template`.
    #[arg(long)]
    template_file: Option<PathBuf>,
    /// Demonstrations for few-shot mode (`source<TAB>reference` or JSONL).
    #[arg(long)]
    shots: Option<PathBuf>,
    /// BM25 index (default: `{work_dir}/index/{pair}.json`, else built from training data).
    #[arg(long)]
    index: Option<PathBuf>,
    /// Candidate systems whose records maps-lite selects from.
    #[arg(long, value_delimiter = ',')]
    candidates: Vec<String>,
}

fn template(args: &TranslateArgs) -> Result<PromptTemplate> {
    if let Some(p) = &args.template_file {
        return PromptTemplate::load(p).map_err(Exit::config);
    }
    let family = args.template.clone().unwrap_or_else(|| {
        match args.mode {
            PipelineMode::FewShot => "base-5shot",
            PipelineMode::Bm25Shot => "instruct-1shot",
            _ => "ft",
        }
        .to_string()
    });
    PromptTemplate::bundled_family(&family).ok_or_else(|| {
        let known: Vec<String> = PromptTemplate::bundled().into_keys().collect();
        Exit::config(format!(
            "unknown template family `{family}`; bundled: {}",
            known.join(", ")
        ))
    })
}

fn bm25_index(cfg: &RunConfig, args: &TranslateArgs) -> Result<Bm25Index> {
    let path = args
        .index
        .clone()
        .unwrap_or_else(|| index_path(cfg, args.pair));
    if path.exists() {
        return Bm25Index::load(&path).with_context(|| format!("loading {}", path.display()));
    }
    let (store, _) = training_store(cfg, args.pair)?;
    Ok(Bm25Index::with_defaults(store.all_pairs())?)
}

pub fn translate(cfg: &RunConfig, args: TranslateArgs) -> Result<()> {
    let sets = load_sets(cfg, args.pair, &args.test_sets)?;
    let rt = tokio::runtime::Runtime::new()?;
    let records_dir = cfg.records_dir();

    let orch = if args.mode == PipelineMode::MapsLite {
        None
    } else {
        let name = args.endpoint.clone().unwrap_or_else(|| args.system.clone());
        let ep = cfg
            .endpoints
            .get(&name)
            .ok_or_else(|| Exit::config(format!("no endpoint `{name}` in the config")))?;
        let cache = ResponseCache::open(&cfg.cache_dir())?;
        Some(Orchestrator::new(ep.clone(), Some(cache), cfg.concurrency).map_err(Exit::config)?)
    };
    let template = match args.mode {
        PipelineMode::Direct | PipelineMode::FewShot | PipelineMode::Bm25Shot => {
            Some(template(&args)?)
        }
        _ => None,
    };
    let shots: Vec<SegmentPair> = match (args.mode, &args.shots) {
        (PipelineMode::FewShot, Some(p)) => read_pairs(p)?
            .into_iter()
            .enumerate()
            .map(|(index, (source, reference))| SegmentPair {
                index,
                source,
                reference,
            })
            .collect(),
        (PipelineMode::FewShot, None) => return Err(Exit::config("few-shot mode needs --shots")),
        _ => Vec::new(),
    };
    let index = match args.mode {
        PipelineMode::Bm25Shot => Some(bm25_index(cfg, &args)?),
        _ => None,
    };
    let catalog = catalog(cfg, args.pair)?;
    let scorer = match (&cfg.scorer, args.mode) {
        (Some(s), PipelineMode::MapsLite) => {
            Some(ScorerClient::new(&s.url, s.batch_size, s.timeout_secs).map_err(Exit::config)?)
        }
        _ => None,
    };
    if args.mode == PipelineMode::MapsLite && args.candidates.is_empty() {
        return Err(Exit::config("maps-lite needs --candidates"));
    }

    let (mut total, mut failed) = (0usize, 0usize);
    for ts in &sets {
        let records: Vec<TranslationRecord> = rt.block_on(async {
            let o = orch.as_ref();
            Ok::<_, anyhow::Error>(match args.mode {
                PipelineMode::Direct => {
                    run_direct(o.unwrap(), &args.system, ts, template.as_ref().unwrap()).await
                }
                PipelineMode::FewShot => {
                    let t = template.as_ref().unwrap();
                    let n = t.shot_policy.count();
                    if shots.len() < n {
                        bail!(
                            "template {} needs {n} shots, --shots has {}",
                            t.family,
                            shots.len()
                        );
                    }
                    run_fewshot(o.unwrap(), &args.system, ts, t, &shots[..n]).await
                }
                PipelineMode::Bm25Shot => {
                    run_bm25_shot(
                        o.unwrap(),
                        &args.system,
                        ts,
                        index.as_ref().unwrap(),
                        template.as_ref().unwrap(),
                    )
                    .await?
                }
                PipelineMode::CotAuto => run_cot_auto(o.unwrap(), &args.system, ts).await,
                PipelineMode::CotGiven => {
                    run_cot_given(o.unwrap(), &args.system, ts, &catalog).await?
                }
                PipelineMode::CotRandom => {
                    run_cot_random(o.unwrap(), &args.system, ts, &catalog, cfg.seed).await?
                }
                PipelineMode::MapsLite => {
                    let mut cands = Vec::new();
                    for c in &args.candidates {
                        let path = record_path(&records_dir, c, ts.lang_pair, &ts.id);
                        cands
                            .push(read_records(&path).with_context(|| {
                                format!("candidate records {}", path.display())
                            })?);
                    }
                    run_maps_lite(&args.system, ts, &cands, scorer.as_ref()).await?
                }
            })
        })?;
        let n_failed = records.iter().filter(|r| !r.is_ok()).count();
        let path = record_path(&records_dir, &args.system, ts.lang_pair, &ts.id);
        write_records(&path, &records)?;
        println!(
            "{}/{}: {} segments, {} failed -> {}",
            ts.lang_pair,
            ts.id,
            records.len(),
            n_failed,
            path.display()
        );
        total += records.len();
        failed += n_failed;
    }
    if let Some(o) = &orch {
        println!("network calls: {}", o.network_calls());
    }
    let rate = if total == 0 {
        0.0
    } else {
        failed as f64 / total as f64
    };
    if rate > cfg.max_failure_rate {
        return Err(Exit::new(
            INFERENCE,
            format!(
                "{failed} of {total} segments failed ({:.1}%), above max_failure_rate",
                rate * 100.0
            ),
        ));
    }
    Ok(())
}
