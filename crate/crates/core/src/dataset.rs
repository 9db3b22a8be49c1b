//! Fine-tuning data in Alpaca format: plain translation data and the
//! two-task mixture (hint generation plus hint-conditioned translation).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{sample_training, CorpusError, LangPair, TrainingStore};
use crate::prompting::{
    cot_instruction, ft_instruction, hint_instruction, HintCatalog, PromptError,
};
use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("no hint domains given")]
    NoHintDomains,
    #[error("domain {domain}: need {needed} monolingual inputs, only {available} unused")]
    MonoTooSmall {
        domain: String,
        needed: usize,
        available: usize,
    },
    #[error("example {index}: {reason}")]
    BadExample { index: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Plain translation instruction, no hint.
    Translation,
    HintGeneration,
    /// Translation whose instruction embeds a domain hint.
    DomainTranslation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainingExample {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub task: Task,
    pub domain: String,
    pub lang_pair: LangPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub alpha: f64,
    pub hint_domains: Vec<String>,
    pub seed: u64,
}

impl MixSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(DatasetError::InvalidAlpha(self.alpha));
        }
        if self.hint_domains.is_empty() {
            return Err(DatasetError::NoHintDomains);
        }
        Ok(())
    }

    /// `floor(alpha * n)`, tolerant of products like `0.29 * 100 = 28.999…`.
    pub fn hint_count(&self, n: usize) -> usize {
        (self.alpha * n as f64 + 1e-9).floor() as usize
    }

    /// Per-domain hint counts: an even split, the first `total % d` domains taking one extra.
    pub fn split(&self, total: usize) -> Vec<usize> {
        let d = self.hint_domains.len();
        let (q, r) = (total / d, total % d);
        (0..d).map(|i| q + usize::from(i < r)).collect()
    }
}

/// Monolingual source texts per domain.
pub type MonoStore = BTreeMap<String, Vec<String>>;

pub fn mono_from_store(store: &TrainingStore) -> MonoStore {
    store
        .domains()
        .map(|d| {
            let sources = store
                .domain(d)
                .map(|p| p.iter().map(|s| s.source.clone()).collect())
                .unwrap_or_default();
            (d.to_string(), sources)
        })
        .collect()
}

// Decorrelates the per-domain sampling seeds.
fn domain_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `per_domain` sampled pairs from each domain in the plain FT format.
pub fn build_ft_dataset(
    store: &TrainingStore,
    domains: &[String],
    per_domain: usize,
    seed: u64,
) -> Result<Vec<TrainingExample>> {
    let pair = store.lang_pair;
    let instruction = ft_instruction(pair);
    let mut out = Vec::with_capacity(domains.len() * per_domain);
    for (i, domain) in domains.iter().enumerate() {
        for p in sample_training(store, domain, per_domain, domain_seed(seed, i))? {
            out.push(TrainingExample {
                instruction: instruction.clone(),
                input: p.source,
                output: p.reference,
                task: Task::Translation,
                domain: domain.clone(),
                lang_pair: pair,
            });
        }
    }
    Ok(out)
}

fn with_training_hint(
    examples: &[TrainingExample],
    catalog: &HintCatalog,
) -> Result<Vec<TrainingExample>> {
    examples
        .iter()
        .enumerate()
        .map(|(index, ex)| {
            if ex.task == Task::HintGeneration {
                return Err(DatasetError::BadExample {
                    index,
                    reason: "hint-generation example given as translation data".into(),
                });
            }
            if ex.input.is_empty() || ex.output.is_empty() {
                return Err(DatasetError::BadExample {
                    index,
                    reason: "empty input or output".into(),
                });
            }
            let hint = catalog.training_hint(&ex.domain)?;
            Ok(TrainingExample {
                instruction: cot_instruction(hint, ex.lang_pair),
                task: Task::DomainTranslation,
                ..ex.clone()
            })
        })
        .collect()
}

/// Translation examples rewritten with their domain hint and no hint-generation task.
pub fn build_hint_ft_g_dataset(
    examples: &[TrainingExample],
    catalog: &HintCatalog,
) -> Result<Vec<TrainingExample>> {
    with_training_hint(examples, catalog)
}

/// Hint-conditioned translation examples plus `floor(alpha * N)` hint-generation
/// examples spread evenly over `mix.hint_domains`, shuffled by `mix.seed`.
pub fn build_cot_dataset(
    examples: &[TrainingExample],
    catalog: &HintCatalog,
    mix: &MixSpec,
    mono: &MonoStore,
    lang_pair: LangPair,
) -> Result<Vec<TrainingExample>> {
    mix.validate()?;
    for d in &mix.hint_domains {
        catalog.training_hint(d)?;
    }
    let mut out = with_training_hint(examples, catalog)?;
    let used: HashSet<&str> = examples.iter().map(|e| e.input.as_str()).collect();
    let counts = mix.split(mix.hint_count(examples.len()));
    let instruction = hint_instruction(lang_pair);
    for (i, (domain, &need)) in mix.hint_domains.iter().zip(&counts).enumerate() {
        if need == 0 {
            continue;
        }
        let mut seen = HashSet::new();
        let pool: Vec<&String> = mono
            .get(domain)
            .map(|v| v.as_slice())
            .unwrap_or_default()
            .iter()
            .filter(|s| !s.is_empty() && !used.contains(s.as_str()) && seen.insert(s.as_str()))
            .collect();
        if pool.len() < need {
            return Err(DatasetError::MonoTooSmall {
                domain: domain.clone(),
                needed: need,
                available: pool.len(),
            });
        }
        let hint = catalog.training_hint(domain)?;
        let mut rng = SeededRng::with_stream(mix.seed, i as u64 + 1);
        for j in rng.sample_indices(pool.len(), need) {
            out.push(TrainingExample {
                instruction: instruction.clone(),
                input: pool[j].clone(),
                output: hint.to_string(),
                task: Task::HintGeneration,
                domain: domain.clone(),
                lang_pair,
            });
        }
    }
    SeededRng::new(mix.seed).shuffle(&mut out);
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct AlpacaRecord {
    instruction: String,
    input: String,
    output: String,
}

/// The Alpaca JSON text: a two-space indented array of
/// `{instruction, input, output}` objects, no trailing newline.
pub fn alpaca_json(examples: &[TrainingExample]) -> String {
    let records: Vec<AlpacaRecord> = examples
        .iter()
        .map(|e| AlpacaRecord {
            instruction: e.instruction.clone(),
            input: e.input.clone(),
            output: e.output.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("strings always serialize")
}

pub fn emit_alpaca(examples: &[TrainingExample], path: &Path) -> Result<()> {
    fs::write(path, alpaca_json(examples)).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads an Alpaca file back as `(instruction, input, output)` triples.
pub fn read_alpaca(path: &Path) -> Result<Vec<(String, String, String)>> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let records: Vec<AlpacaRecord> =
        serde_json::from_str(&text).map_err(|source| DatasetError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(records
        .into_iter()
        .map(|r| (r.instruction, r.input, r.output))
        .collect())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Trainer settings used for the reference fine-tuning runs; recorded for
/// provenance only, nothing here trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerSettings {
    pub batch_size: u32,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_length: u32,
    pub lora_dim: u32,
    pub lora_dropout: f64,
    pub epochs: u32,
}

impl Default for TrainerSettings {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 1e-4,
            weight_decay: 0.1,
            max_length: 512,
            lora_dim: 8,
            lora_dropout: 0.1,
            epochs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: String,
    pub lang_pair: LangPair,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub total: usize,
    /// Example counts keyed by task, then domain.
    pub counts: BTreeMap<Task, BTreeMap<String, usize>>,
    pub source_digests: BTreeMap<String, String>,
    pub output_digest: String,
    pub recommended_trainer: TrainerSettings,
}

impl DatasetManifest {
    /// Digests every regular file under `sources` (recursively, sorted by path).
    pub fn new(
        kind: &str,
        lang_pair: LangPair,
        seed: u64,
        alpha: Option<f64>,
        examples: &[TrainingExample],
        sources: &[PathBuf],
    ) -> Result<Self> {
        let mut counts: BTreeMap<Task, BTreeMap<String, usize>> = BTreeMap::new();
        for e in examples {
            *counts
                .entry(e.task)
                .or_default()
                .entry(e.domain.clone())
                .or_default() += 1;
        }
        let mut files = BTreeSet::new();
        for s in sources {
            collect_files(s, &mut files)?;
        }
        let mut source_digests = BTreeMap::new();
        for f in files {
            let bytes = fs::read(&f).map_err(|source| DatasetError::Io {
                path: f.clone(),
                source,
            })?;
            source_digests.insert(f.display().to_string(), sha256_hex(&bytes));
        }
        Ok(Self {
            kind: kind.to_string(),
            lang_pair,
            seed,
            alpha,
            total: examples.len(),
            counts,
            source_digests,
            output_digest: sha256_hex(alpaca_json(examples).as_bytes()),
            recommended_trainer: TrainerSettings::default(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn collect_files(path: &Path, out: &mut BTreeSet<PathBuf>) -> Result<()> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.is_dir() {
        for entry in fs::read_dir(path).map_err(io)? {
            collect_files(&entry.map_err(io)?.path(), out)?;
        }
    } else {
        out.insert(path.to_path_buf());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(domains: &[(&str, usize)]) -> TrainingStore {
        let mut s = TrainingStore::new(LangPair::DE_EN);
        for &(d, n) in domains {
            s.ingest(
                d,
                (0..n).map(|i| (format!("{d} quelle {i}"), format!("{d} source {i}"))),
            );
        }
        s
    }

    fn catalog() -> HintCatalog {
        HintCatalog::for_pair(LangPair::DE_EN)
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ft_counts_and_format() {
        let s = store(&[("Law", 30), ("Subtitles", 30)]);
        let ex = build_ft_dataset(&s, &names(&["Law", "Subtitles"]), 12, 7).unwrap();
        assert_eq!(ex.len(), 24);
        assert_eq!(ex.iter().filter(|e| e.domain == "Law").count(), 12);
        assert!(ex
            .iter()
            .all(|e| e.instruction == "Translate the following German text into English."));
        assert!(ex
            .iter()
            .all(|e| e.output == e.input.replace("quelle", "source")));
        assert!(build_ft_dataset(&s, &names(&["Law"]), 0, 7)
            .unwrap()
            .is_empty());
        assert!(build_ft_dataset(&s, &names(&["Law"]), 31, 7).is_err());
    }

    #[test]
    fn ft_is_seed_deterministic() {
        let s = store(&[("Law", 50)]);
        let a = build_ft_dataset(&s, &names(&["Law"]), 10, 3).unwrap();
        let b = build_ft_dataset(&s, &names(&["Law"]), 10, 3).unwrap();
        let c = build_ft_dataset(&s, &names(&["Law"]), 10, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn hint_count_floor_and_split() {
        let mix = MixSpec {
            alpha: 0.1,
            hint_domains: names(&["Law", "Subtitles"]),
            seed: 1,
        };
        assert_eq!(mix.hint_count(25), 2);
        assert_eq!(mix.split(2), [1, 1]);
        assert_eq!(mix.hint_count(40000), 4000);
        assert_eq!(mix.split(5), [3, 2]);
        let m = MixSpec {
            alpha: 0.29,
            ..mix.clone()
        };
        assert_eq!(m.hint_count(100), 29);
        assert!(MixSpec {
            alpha: 0.0,
            ..mix.clone()
        }
        .validate()
        .is_err());
        assert!(MixSpec { alpha: 1.5, ..mix }.validate().is_err());
    }

    #[test]
    fn cot_mixture() {
        let s = store(&[("Law", 40), ("Subtitles", 40)]);
        let tr = build_ft_dataset(&s, &names(&["Law", "Subtitles"]), 10, 2).unwrap();
        let mix = MixSpec {
            alpha: 0.25,
            hint_domains: names(&["Law", "Subtitles"]),
            seed: 9,
        };
        let out = build_cot_dataset(&tr, &catalog(), &mix, &mono_from_store(&s), LangPair::DE_EN)
            .unwrap();
        assert_eq!(out.len(), 25);
        let hints: Vec<_> = out
            .iter()
            .filter(|e| e.task == Task::HintGeneration)
            .collect();
        assert_eq!(hints.len(), 5);
        assert_eq!(hints.iter().filter(|e| e.domain == "Law").count(), 3);
        let sources: HashSet<_> = tr.iter().map(|e| e.input.as_str()).collect();
        assert!(hints.iter().all(|h| !sources.contains(h.input.as_str())));
        assert!(hints
            .iter()
            .all(|h| h.output == catalog().training_hint(&h.domain).unwrap()));
        for e in out.iter().filter(|e| e.task == Task::DomainTranslation) {
            let hint = catalog().training_hint(&e.domain).unwrap().to_string();
            assert!(e.instruction.ends_with(&format!("### Hint:\n{hint}")));
        }
        let again = build_cot_dataset(&tr, &catalog(), &mix, &mono_from_store(&s), LangPair::DE_EN)
            .unwrap();
        assert_eq!(alpaca_json(&out), alpaca_json(&again));
    }

    #[test]
    fn cot_errors() {
        let s = store(&[("Law", 12)]);
        let tr = build_ft_dataset(&s, &names(&["Law"]), 10, 2).unwrap();
        let mix = MixSpec {
            alpha: 0.5,
            hint_domains: names(&["Law"]),
            seed: 9,
        };
        // 5 hint inputs needed, 2 unused sources left.
        assert!(matches!(
            build_cot_dataset(&tr, &catalog(), &mix, &mono_from_store(&s), LangPair::DE_EN),
            Err(DatasetError::MonoTooSmall {
                needed: 5,
                available: 2,
                ..
            })
        ));
        let mix = MixSpec {
            hint_domains: names(&["Cooking"]),
            ..mix
        };
        assert!(matches!(
            build_cot_dataset(&tr, &catalog(), &mix, &mono_from_store(&s), LangPair::DE_EN),
            Err(DatasetError::Prompt(PromptError::MissingHint(_)))
        ));
    }

    #[test]
    fn empty_translation_set_yields_no_hints() {
        let mix = MixSpec {
            alpha: 0.1,
            hint_domains: names(&["Law"]),
            seed: 0,
        };
        let out =
            build_cot_dataset(&[], &catalog(), &mix, &MonoStore::new(), LangPair::DE_EN).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn hint_ft_g_matches_cot_translation_subset() {
        let s = store(&[("Law", 40), ("Subtitles", 40)]);
        let tr = build_ft_dataset(&s, &names(&["Law", "Subtitles"]), 10, 2).unwrap();
        let g = build_hint_ft_g_dataset(&tr, &catalog()).unwrap();
        assert!(g.iter().all(|e| e.task == Task::DomainTranslation));
        let mix = MixSpec {
            alpha: 0.01,
            hint_domains: names(&["Law"]),
            seed: 5,
        };
        let mut cot: Vec<_> =
            build_cot_dataset(&tr, &catalog(), &mix, &mono_from_store(&s), LangPair::DE_EN)
                .unwrap()
                .into_iter()
                .filter(|e| e.task == Task::DomainTranslation)
                .collect();
        let mut g_sorted = g.clone();
        cot.sort();
        g_sorted.sort();
        assert_eq!(cot, g_sorted);
    }

    #[test]
    fn alpaca_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        emit_alpaca(&[], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "[]");
        let s = store(&[("Law", 5)]);
        let ex = build_ft_dataset(&s, &names(&["Law"]), 5, 1).unwrap();
        emit_alpaca(&ex, &path).unwrap();
        let back = read_alpaca(&path).unwrap();
        assert_eq!(back.len(), 5);
        for (e, (i, x, o)) in ex.iter().zip(back) {
            assert_eq!((&e.instruction, &e.input, &e.output), (&i, &x, &o));
        }
    }

    #[test]
    fn manifest_counts() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("law.tsv");
        fs::write(&src, "a\tb\n").unwrap();
        let s = store(&[("Law", 5)]);
        let ex = build_ft_dataset(&s, &names(&["Law"]), 4, 1).unwrap();
        let m = DatasetManifest::new(
            "ft",
            LangPair::DE_EN,
            1,
            None,
            &ex,
            &[dir.path().to_path_buf()],
        )
        .unwrap();
        assert_eq!(m.counts[&Task::Translation]["Law"], 4);
        assert_eq!(m.source_digests.len(), 1);
        assert_eq!(m.recommended_trainer.batch_size, 16);
    }
}
