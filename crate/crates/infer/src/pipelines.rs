//! Inference procedures: direct, few-shot, BM25-shot, the three CoT variants and
//! candidate selection by a QE scorer.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mtbench_core::bm25::Bm25Index;
use mtbench_core::prompting::{
    render_cot_translation_prompt, render_hint_prompt, HintCatalog, PromptError, PromptTemplate,
};
use mtbench_core::rng::SeededRng;
use mtbench_core::{LangPair, SegmentPair, TestSet};
use serde::{Deserialize, Serialize};

use crate::orchestrator::{Completion, Orchestrator};
use crate::scorer::{ScoreItem, ScoreMode, ScorerClient};
use crate::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    Direct,
    FewShot,
    Bm25Shot,
    CotAuto,
    CotGiven,
    CotRandom,
    MapsLite,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 7] = [
        PipelineMode::Direct,
        PipelineMode::FewShot,
        PipelineMode::Bm25Shot,
        PipelineMode::CotAuto,
        PipelineMode::CotGiven,
        PipelineMode::CotRandom,
        PipelineMode::MapsLite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::Direct => "direct",
            PipelineMode::FewShot => "few-shot",
            PipelineMode::Bm25Shot => "bm25-shot",
            PipelineMode::CotAuto => "cot-auto",
            PipelineMode::CotGiven => "cot-given",
            PipelineMode::CotRandom => "cot-random",
            PipelineMode::MapsLite => "maps-lite",
        }
    }

    pub fn uses_hint(self) -> bool {
        matches!(
            self,
            PipelineMode::CotAuto | PipelineMode::CotGiven | PipelineMode::CotRandom
        )
    }

    pub fn is_two_stage(self) -> bool {
        self == PipelineMode::CotAuto
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown pipeline mode `{given}`; valid modes: {valid}")]
pub struct UnknownMode {
    pub given: String,
    pub valid: String,
}

impl FromStr for PipelineMode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PipelineMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMode {
                given: s.to_string(),
                valid: PipelineMode::ALL.map(PipelineMode::as_str).join(", "),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub system_id: String,
    pub hypothesis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// One translated segment with every prompt and raw output that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub segment_index: usize,
    pub system_id: String,
    pub mode: PipelineMode,
    pub source: String,
    pub reference: String,
    /// Post-processed translation; empty when `error` is set.
    pub hypothesis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2_prompt: Option<String>,
    /// Prompt of single-stage modes without a hint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    /// Completion text before post-processing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot: Option<SegmentPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Candidate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TranslationRecord {
    fn new(system_id: &str, mode: PipelineMode, seg: &SegmentPair) -> Self {
        Self {
            segment_index: seg.index,
            system_id: system_id.to_string(),
            mode,
            source: seg.source.clone(),
            reference: seg.reference.clone(),
            hypothesis: String::new(),
            hint: None,
            stage1_prompt: None,
            stage1_output: None,
            stage2_prompt: None,
            prompt: None,
            raw_output: None,
            shot: None,
            candidates: None,
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn finish(&mut self, c: &Completion, cut_label: Option<&str>) {
        match &c.text {
            Some(text) => {
                self.hypothesis = postprocess(text, cut_label);
                self.raw_output = Some(text.clone());
            }
            None => self.error = Some(c.error.clone().unwrap_or_else(|| "request failed".into())),
        }
    }
}

/// Keeps the first paragraph of a completion, optionally cut at a
/// `\n{label}:` continuation, trimmed.
pub fn postprocess(text: &str, cut_label: Option<&str>) -> String {
    let mut out = text.trim_start();
    let mut offset = 0;
    let mut para_end = out.len();
    for line in out.split_inclusive('\n') {
        if offset > 0 && line.trim().is_empty() {
            para_end = offset;
            break;
        }
        offset += line.len();
    }
    out = &out[..para_end];
    if let Some(label) = cut_label {
        if let Some(pos) = out.find(&format!("\n{label}:")) {
            out = &out[..pos];
        }
    }
    out.trim().to_string()
}

/// Submits one prompt per record (records with a prompt error are skipped)
/// and returns completions aligned with `prompts`.
async fn run_prompts(orch: &Orchestrator, prompts: &[Option<String>]) -> Vec<Option<Completion>> {
    let requests = prompts
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.as_ref().map(|p| orch.request(i, p.clone())))
        .collect();
    let mut out: Vec<Option<Completion>> = vec![None; prompts.len()];
    for c in orch.execute_batch(requests).await {
        let i = c.request_id;
        out[i] = Some(c);
    }
    out
}

fn split_prompt(
    rec: &mut TranslationRecord,
    prompt: Result<String, PromptError>,
) -> Option<String> {
    match prompt {
        Ok(p) => Some(p),
        Err(e) => {
            rec.error = Some(e.to_string());
            None
        }
    }
}

async fn single_stage(
    orch: &Orchestrator,
    mut records: Vec<TranslationRecord>,
    prompts: Vec<Option<String>>,
    cut_label: Option<&str>,
) -> Vec<TranslationRecord> {
    let completions = run_prompts(orch, &prompts).await;
    for (rec, c) in records.iter_mut().zip(&completions) {
        if let Some(c) = c {
            rec.finish(c, cut_label);
        }
    }
    records
}

/// Zero-shot translation with `template` (typically the fine-tuned frame).
pub async fn run_direct(
    orch: &Orchestrator,
    system_id: &str,
    ts: &TestSet,
    template: &PromptTemplate,
) -> Vec<TranslationRecord> {
    run_fixed_shots(
        orch,
        system_id,
        PipelineMode::Direct,
        ts,
        template,
        &[],
        None,
    )
    .await
}

/// Few-shot translation with the same demonstrations for every segment.
pub async fn run_fewshot(
    orch: &Orchestrator,
    system_id: &str,
    ts: &TestSet,
    template: &PromptTemplate,
    shots: &[SegmentPair],
) -> Vec<TranslationRecord> {
    let label = ts.lang_pair.src().name();
    run_fixed_shots(
        orch,
        system_id,
        PipelineMode::FewShot,
        ts,
        template,
        shots,
        Some(label),
    )
    .await
}

async fn run_fixed_shots(
    orch: &Orchestrator,
    system_id: &str,
    mode: PipelineMode,
    ts: &TestSet,
    template: &PromptTemplate,
    shots: &[SegmentPair],
    cut_label: Option<&str>,
) -> Vec<TranslationRecord> {
    let mut records = Vec::with_capacity(ts.len());
    let mut prompts = Vec::with_capacity(ts.len());
    for seg in &ts.segments {
        let mut rec = TranslationRecord::new(system_id, mode, seg);
        let p = split_prompt(
            &mut rec,
            render_plain(template, shots, &seg.source, ts.lang_pair),
        );
        rec.prompt = p.clone();
        prompts.push(p);
        records.push(rec);
    }
    single_stage(orch, records, prompts, cut_label).await
}

fn render_plain(
    template: &PromptTemplate,
    shots: &[SegmentPair],
    source: &str,
    pair: LangPair,
) -> Result<String, PromptError> {
    if source.is_empty() {
        return Err(PromptError::EmptySource);
    }
    template.render(shots, source, pair, None)
}

/// One-shot translation with the BM25 nearest training pair as demonstration.
pub async fn run_bm25_shot(
    orch: &Orchestrator,
    system_id: &str,
    ts: &TestSet,
    index: &Bm25Index,
    template: &PromptTemplate,
) -> Result<Vec<TranslationRecord>, OrchestratorError> {
    if index.is_empty() {
        return Err(OrchestratorError::Config("BM25 index is empty".into()));
    }
    let mut records = Vec::with_capacity(ts.len());
    let mut prompts = Vec::with_capacity(ts.len());
    for seg in &ts.segments {
        let mut rec = TranslationRecord::new(system_id, PipelineMode::Bm25Shot, seg);
        let (id, _) = index.top_k(&seg.source, 1)[0];
        let shot = index.pair(id).expect("top_k returns valid ids").clone();
        let p = split_prompt(
            &mut rec,
            render_plain(
                template,
                std::slice::from_ref(&shot),
                &seg.source,
                ts.lang_pair,
            ),
        );
        rec.shot = Some(shot);
        rec.prompt = p.clone();
        prompts.push(p);
        records.push(rec);
    }
    let label = ts.lang_pair.src().name();
    Ok(single_stage(orch, records, prompts, Some(label)).await)
}

/// Two calls per segment: generate a domain hint, then translate with it.
pub async fn run_cot_auto(
    orch: &Orchestrator,
    system_id: &str,
    ts: &TestSet,
) -> Vec<TranslationRecord> {
    let pair = ts.lang_pair;
    let mut records = Vec::with_capacity(ts.len());
    let mut stage1 = Vec::with_capacity(ts.len());
    for seg in &ts.segments {
        let mut rec = TranslationRecord::new(system_id, PipelineMode::CotAuto, seg);
        let p = split_prompt(&mut rec, render_hint_prompt(&seg.source, pair));
        rec.stage1_prompt = p.clone();
        stage1.push(p);
        records.push(rec);
    }
    let hints = run_prompts(orch, &stage1).await;
    let mut stage2 = Vec::with_capacity(ts.len());
    for (rec, c) in records.iter_mut().zip(&hints) {
        let Some(c) = c else {
            stage2.push(None);
            continue;
        };
        let Some(hint) = &c.text else {
            rec.error = Some(format!(
                "hint generation failed: {}",
                c.error.as_deref().unwrap_or("request failed")
            ));
            stage2.push(None);
            continue;
        };
        // Completion text is already trailing-trimmed; inserted verbatim.
        rec.stage1_output = Some(hint.clone());
        rec.hint = Some(hint.clone());
        let p = split_prompt(rec, render_cot_translation_prompt(hint, &rec.source, pair));
        rec.stage2_prompt = p.clone();
        stage2.push(p);
    }
    let completions = run_prompts(orch, &stage2).await;
    for (rec, c) in records.iter_mut().zip(&completions) {
        if let Some(c) = c {
            rec.finish(c, None);
        }
    }
    records
}

/// Decoding hint for a test set, looked up by id first, then by domain.
pub fn decoding_hint_for<'a>(
    catalog: &'a HintCatalog,
    ts: &TestSet,
) -> Result<&'a str, PromptError> {
    catalog
        .decoding_hint(&ts.id)
        .or_else(|_| catalog.decoding_hint(&ts.domain))
}

async fn run_with_hints(
    orch: &Orchestrator,
    system_id: &str,
    mode: PipelineMode,
    ts: &TestSet,
    hints: &[&str],
) -> Vec<TranslationRecord> {
    let mut records = Vec::with_capacity(ts.len());
    let mut prompts = Vec::with_capacity(ts.len());
    for (seg, hint) in ts.segments.iter().zip(hints) {
        let mut rec = TranslationRecord::new(system_id, mode, seg);
        rec.hint = Some(hint.to_string());
        let p = split_prompt(
            &mut rec,
            render_cot_translation_prompt(hint, &seg.source, ts.lang_pair),
        );
        rec.stage2_prompt = p.clone();
        prompts.push(p);
        records.push(rec);
    }
    single_stage(orch, records, prompts, None).await
}

/// One call per segment with the test set's hand-written decoding hint.
pub async fn run_cot_given(
    orch: &Orchestrator,
    system_id: &str,
    ts: &TestSet,
    catalog: &HintCatalog,
) -> Result<Vec<TranslationRecord>, OrchestratorError> {
    let hint = decoding_hint_for(catalog, ts)?;
    let hints = vec![hint; ts.len()];
    Ok(run_with_hints(orch, system_id, PipelineMode::CotGiven, ts, &hints).await)
}

/// Hint index for a segment, uniform over `n` and fixed by `(seed, segment_index)`.
pub fn random_hint_index(seed: u64, segment_index: usize, n: usize) -> usize {
    SeededRng::with_stream(seed, segment_index as u64).below(n as u64) as usize
}

/// One call per segment with a decoding hint drawn uniformly per segment.
pub async fn run_cot_random(
    orch: &Orchestrator,
    system_id: &str,
    ts: &TestSet,
    catalog: &HintCatalog,
    seed: u64,
) -> Result<Vec<TranslationRecord>, OrchestratorError> {
    let pool: Vec<&str> = catalog
        .decoding_hints
        .values()
        .map(String::as_str)
        .collect();
    if pool.is_empty() {
        return Err(OrchestratorError::Config(
            "decoding-hint catalog is empty".into(),
        ));
    }
    let hints: Vec<&str> = ts
        .segments
        .iter()
        .map(|s| pool[random_hint_index(seed, s.index, pool.len())])
        .collect();
    Ok(run_with_hints(orch, system_id, PipelineMode::CotRandom, ts, &hints).await)
}

/// Per segment, keeps the candidate with the highest QE score (ties go to the
/// earlier candidate set). A single candidate set needs no scorer.
pub async fn run_maps_lite(
    system_id: &str,
    ts: &TestSet,
    candidates: &[Vec<TranslationRecord>],
    scorer: Option<&ScorerClient>,
) -> Result<Vec<TranslationRecord>, OrchestratorError> {
    if candidates.is_empty() {
        return Err(OrchestratorError::Config(
            "maps-lite needs at least one candidate set".into(),
        ));
    }
    for (k, set) in candidates.iter().enumerate() {
        if set.len() != ts.len() {
            return Err(OrchestratorError::Config(format!(
                "candidate set {k} has {} records for {} segments",
                set.len(),
                ts.len()
            )));
        }
    }
    // Scores per (segment, candidate); unscored candidates stay `None`.
    let mut scores: Vec<Vec<Option<f64>>> = vec![vec![None; candidates.len()]; ts.len()];
    if candidates.len() > 1 {
        let scorer = scorer.ok_or_else(|| {
            OrchestratorError::Config("maps-lite with several candidate sets needs a scorer".into())
        })?;
        let mut items = Vec::new();
        let mut slots = Vec::new();
        for (i, seg) in ts.segments.iter().enumerate() {
            for (k, set) in candidates.iter().enumerate() {
                if set[i].is_ok() {
                    items.push(ScoreItem {
                        src: seg.source.clone(),
                        mt: set[i].hypothesis.clone(),
                        reference: None,
                    });
                    slots.push((i, k));
                }
            }
        }
        let outcome = scorer.score(&items, ScoreMode::Qe).await?;
        for ((i, k), s) in slots.into_iter().zip(outcome.scores) {
            scores[i][k] = Some(s);
        }
    }
    let mut out = Vec::with_capacity(ts.len());
    for (i, seg) in ts.segments.iter().enumerate() {
        let mut rec = TranslationRecord::new(system_id, PipelineMode::MapsLite, seg);
        let mut best: Option<(usize, Option<f64>)> = None;
        for (k, set) in candidates.iter().enumerate() {
            if !set[i].is_ok() {
                continue;
            }
            let s = scores[i][k];
            let better = match best {
                None => true,
                Some((_, b)) => s.unwrap_or(f64::NEG_INFINITY) > b.unwrap_or(f64::NEG_INFINITY),
            };
            if better {
                best = Some((k, s));
            }
        }
        rec.candidates = Some(
            candidates
                .iter()
                .enumerate()
                .map(|(k, set)| Candidate {
                    system_id: set[i].system_id.clone(),
                    hypothesis: set[i].hypothesis.clone(),
                    score: scores[i][k],
                })
                .collect(),
        );
        match best {
            Some((k, _)) => {
                rec.hypothesis = candidates[k][i].hypothesis.clone();
                rec.raw_output = candidates[k][i].raw_output.clone();
            }
            None => rec.error = Some("every candidate failed".into()),
        }
        out.push(rec);
    }
    Ok(out)
}

/// `{dir}/{system}/{pair}/{testset}.jsonl`
pub fn record_path(dir: &Path, system_id: &str, pair: LangPair, test_set: &str) -> PathBuf {
    dir.join(system_id)
        .join(pair.to_string())
        .join(format!("{test_set}.jsonl"))
}

pub fn write_records(path: &Path, records: &[TranslationRecord]) -> Result<(), OrchestratorError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TranslationRecord>, OrchestratorError> {
    let f = fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
