//! In-memory Okapi BM25 over the source side of a training datastore.
//!
//! Per query term `t` (each distinct term counted once):
//!
//! ```text
//! idf(t)   = ln((N - df + 0.5) / (df + 0.5) + 1)
//! score   += idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
//! ```
//!
//! The `+ 1` inside the log keeps every term contribution nonnegative.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SegmentPair;

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;
const DUMP_FORMAT: &str = "mtbench-bm25";
const DUMP_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum Bm25Error {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("document id {id} out of range (corpus has {len} documents)")]
    InvalidDoc { id: usize, len: usize },
    #[error("index dump: {0}")]
    Dump(String),
}

/// Chinese ideographs (and compatibility forms) index one character per token.
fn is_cjk_ideograph(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

/// Lowercases, splits on whitespace and punctuation, and emits every CJK
/// ideograph as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if is_cjk_ideograph(c) {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            tokens.push(c.to_string());
        } else if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Distinct terms in first-occurrence order.
fn query_terms(query: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    tokenize(query)
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

#[derive(Debug, Clone)]
struct DocStats {
    tf: HashMap<String, u32>,
    len: usize,
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    k1: f64,
    b: f64,
    avgdl: f64,
    docs: Vec<DocStats>,
    df: HashMap<String, usize>,
    postings: HashMap<String, Vec<(usize, u32)>>,
    pairs: Vec<SegmentPair>,
}

#[derive(Serialize, Deserialize)]
struct Dump {
    format: String,
    version: u32,
    k1: f64,
    b: f64,
    pairs: Vec<SegmentPair>,
}

impl Bm25Index {
    pub fn build(pairs: Vec<SegmentPair>, k1: f64, b: f64) -> Result<Self, Bm25Error> {
        if pairs.is_empty() {
            return Err(Bm25Error::EmptyCorpus);
        }
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(Bm25Error::InvalidParam(format!("k1 = {k1} must be > 0")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Bm25Error::InvalidParam(format!(
                "b = {b} must be in [0, 1]"
            )));
        }
        let mut docs = Vec::with_capacity(pairs.len());
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut total_len = 0usize;
        for (id, pair) in pairs.iter().enumerate() {
            let tokens = tokenize(&pair.source);
            total_len += tokens.len();
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (t, &n) in &tf {
                *df.entry(t.clone()).or_default() += 1;
                postings.entry(t.clone()).or_default().push((id, n));
            }
            docs.push(DocStats {
                tf,
                len: tokens.len(),
            });
        }
        // Integer total keeps avgdl independent of insertion order.
        let avgdl = total_len as f64 / docs.len() as f64;
        Ok(Self {
            k1,
            b,
            avgdl,
            docs,
            df,
            postings,
            pairs,
        })
    }

    pub fn with_defaults(pairs: Vec<SegmentPair>) -> Result<Self, Bm25Error> {
        Self::build(pairs, DEFAULT_K1, DEFAULT_B)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn doc_len(&self, id: usize) -> Option<usize> {
        self.docs.get(id).map(|d| d.len)
    }

    pub fn pair(&self, id: usize) -> Option<&SegmentPair> {
        self.pairs.get(id)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.df(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_weight(&self, term: &str, tf: u32, dl: usize) -> f64 {
        let tf = f64::from(tf);
        let norm = self.k1 * (1.0 - self.b + self.b * dl as f64 / self.avgdl);
        self.idf(term) * (tf * (self.k1 + 1.0)) / (tf + norm)
    }

    pub fn score(&self, query: &str, doc_id: usize) -> Result<f64, Bm25Error> {
        let doc = self.docs.get(doc_id).ok_or(Bm25Error::InvalidDoc {
            id: doc_id,
            len: self.docs.len(),
        })?;
        let mut score = 0.0;
        for term in query_terms(query) {
            if let Some(&tf) = doc.tf.get(&term) {
                score += self.term_weight(&term, tf, doc.len);
            }
        }
        Ok(score)
    }

    /// The `k` best documents, score-descending, ties by ascending doc id.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<(usize, f64)> {
        let mut scores = vec![0.0f64; self.docs.len()];
        for term in query_terms(query) {
            if let Some(list) = self.postings.get(&term) {
                for &(id, tf) in list {
                    scores[id] += self.term_weight(&term, tf, self.docs[id].len);
                }
            }
        }
        let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }

    /// Writes a versioned JSON dump (parameters plus documents); loading rebuilds the statistics.
    pub fn save(&self, path: &Path) -> Result<(), Bm25Error> {
        let dump = Dump {
            format: DUMP_FORMAT.into(),
            version: DUMP_VERSION,
            k1: self.k1,
            b: self.b,
            pairs: self.pairs.clone(),
        };
        let text = serde_json::to_string(&dump).map_err(|e| Bm25Error::Dump(e.to_string()))?;
        fs::write(path, text).map_err(|e| Bm25Error::Dump(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, Bm25Error> {
        let text = fs::read_to_string(path)
            .map_err(|e| Bm25Error::Dump(format!("{}: {e}", path.display())))?;
        let dump: Dump = serde_json::from_str(&text).map_err(|e| Bm25Error::Dump(e.to_string()))?;
        if dump.format != DUMP_FORMAT || dump.version != DUMP_VERSION {
            return Err(Bm25Error::Dump(format!(
                "unsupported dump {} v{}",
                dump.format, dump.version
            )));
        }
        Self::build(dump.pairs, dump.k1, dump.b)
    }
}
