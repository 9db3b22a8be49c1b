//! Corpus BLEU compatible with sacreBLEU's default scorer.
//!
//! Tokenization, n-gram clipping, closest-reference length, brevity penalty
//! and the `exp` smoothing all follow the reference implementation step for
//! step, including its float evaluation order, so scores agree to well under
//! 1e-9 (see the differential fixtures under `tests/fixtures`).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Language;

/// Stand-in for `ln(0)` used by the reference scorer.
const LOG_ZERO: f64 = -9_999_999_999.0;

#[derive(Debug, Error, PartialEq)]
pub enum BleuError {
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("max_n must be at least 1")]
    InvalidOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tokenizer {
    #[serde(rename = "13a")]
    Mteval13a,
    #[serde(rename = "zh")]
    Zh,
}

impl Tokenizer {
    pub fn name(self) -> &'static str {
        match self {
            Tokenizer::Mteval13a => "13a",
            Tokenizer::Zh => "zh",
        }
    }

    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self {
            Tokenizer::Mteval13a => tokenize_13a(text),
            Tokenizer::Zh => tokenize_zh(text),
        }
    }

    fn tokenize_line(self, text: &str) -> String {
        match self {
            Tokenizer::Mteval13a => line_13a(text),
            Tokenizer::Zh => line_zh(text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    Exp,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    pub tokenizer: Tokenizer,
    pub smoothing: Smoothing,
    pub lowercase: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            tokenizer: Tokenizer::Mteval13a,
            smoothing: Smoothing::Exp,
            lowercase: false,
        }
    }
}

impl BleuConfig {
    /// Default configuration for a target language: `zh` tokenization for Chinese, `13a` otherwise.
    pub fn for_target(lang: Language) -> Self {
        let tokenizer = match lang {
            Language::Zh => Tokenizer::Zh,
            _ => Tokenizer::Mteval13a,
        };
        Self {
            tokenizer,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuResult {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub bp: f64,
    pub sys_len: usize,
    pub ref_len: usize,
    pub signature: String,
}

impl fmt::Display for BleuResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.precisions.iter().map(|p| format!("{p:.1}")).collect();
        write!(
            f,
            "{:.2} {} (BP = {:.3} ratio = {:.3} hyp_len = {} ref_len = {})",
            self.score,
            p.join("/"),
            self.bp,
            if self.ref_len == 0 {
                0.0
            } else {
                self.sys_len as f64 / self.ref_len as f64
            },
            self.sys_len,
            self.ref_len
        )
    }
}

pub fn signature(cfg: &BleuConfig, nrefs: usize) -> String {
    format!(
        "BLEU|nrefs:{}|case:{}|tok:{}|smooth:{}|v:{}",
        nrefs,
        if cfg.lowercase { "lc" } else { "mixed" },
        cfg.tokenizer.name(),
        match cfg.smoothing {
            Smoothing::Exp => "exp",
            Smoothing::None => "none",
        },
        env!("CARGO_PKG_VERSION")
    )
}

// Python's `str.isspace`: Unicode White_Space plus the ASCII separators 0x1C-0x1F.
fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

fn py_split(s: &str) -> impl Iterator<Item = &str> {
    s.split(is_py_space).filter(|t| !t.is_empty())
}

fn is_symbol(c: char) -> bool {
    matches!(c, '{'..='~' | '['..='`' | ' '..='&' | '('..='+' | ':'..='@' | '/')
}

/// One left-to-right pass replacing non-overlapping two-character matches.
fn pair_pass(
    chars: &[char],
    hit: impl Fn(char, char) -> bool,
    emit: impl Fn(&mut Vec<char>, char, char),
) -> Vec<char> {
    let mut out = Vec::with_capacity(chars.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        if i + 1 < chars.len() && hit(chars[i], chars[i + 1]) {
            emit(&mut out, chars[i], chars[i + 1]);
            i += 2;
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

/// The shared regexp stage of the `13a` and `zh` tokenizers.
fn regexp_stage(line: &str) -> String {
    let mut chars = Vec::with_capacity(line.len() * 2);
    for c in line.chars() {
        if is_symbol(c) {
            chars.extend([' ', c, ' ']);
        } else {
            chars.push(c);
        }
    }
    let is_sep = |c: char| c == '.' || c == ',';
    let chars = pair_pass(
        &chars,
        |a, b| !a.is_ascii_digit() && is_sep(b),
        |o, a, b| o.extend([a, ' ', b, ' ']),
    );
    let chars = pair_pass(
        &chars,
        |a, b| is_sep(a) && !b.is_ascii_digit(),
        |o, a, b| o.extend([' ', a, ' ', b]),
    );
    let chars = pair_pass(
        &chars,
        |a, b| a.is_ascii_digit() && b == '-',
        |o, a, b| o.extend([a, ' ', b, ' ']),
    );
    let s: String = chars.into_iter().collect();
    py_split(&s).collect::<Vec<_>>().join(" ")
}

fn line_13a(text: &str) -> String {
    let mut line = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    regexp_stage(&format!(" {line} "))
}

/// Code points the `zh` tokenizer isolates. Two of the reference ranges were
/// written as five-digit `\u` escapes, which Python reads as a four-digit
/// escape plus a trailing digit; the bounds below reproduce that comparison.
/// The widened `0x2001..=0x2A6D` range also swallows the symbol blocks at
/// 0x2600 and 0x2700 listed separately by the reference.
fn is_zh_char(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DB5
        | 0x4E00..=0x9FA5
        | 0x9FA6..=0x9FBB
        | 0xF900..=0xFA2D
        | 0xFA30..=0xFA6A
        | 0xFA70..=0xFAD9
        | 0x2001..=0x2A6D
        | 0x2F81..=0x2FA1
        | 0xFF00..=0xFFEF
        | 0x2E80..=0x2EFF
        | 0x3000..=0x303F
        | 0x31C0..=0x31EF
        | 0x2F00..=0x2FDF
        | 0x2FF0..=0x2FFF
        | 0x3100..=0x312F
        | 0x31A0..=0x31BF
        | 0xFE10..=0xFE1F
        | 0xFE30..=0xFE4F
        | 0x3200..=0x32FF
        | 0x3300..=0x33FF)
}

fn line_zh(text: &str) -> String {
    let trimmed = text.trim_matches(is_py_space);
    let mut line = String::with_capacity(trimmed.len() * 2);
    for c in trimmed.chars() {
        if is_zh_char(c) {
            line.push(' ');
            line.push(c);
            line.push(' ');
        } else {
            line.push(c);
        }
    }
    regexp_stage(&line)
}

pub fn tokenize_13a(text: &str) -> Vec<String> {
    line_13a(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

pub fn tokenize_zh(text: &str) -> Vec<String> {
    line_zh(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

pub fn brevity_penalty(sys_len: usize, ref_len: usize) -> f64 {
    if sys_len < ref_len {
        if sys_len > 0 {
            (1.0 - ref_len as f64 / sys_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    }
}

/// Sufficient statistics for corpus BLEU; segment statistics add up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    pub sys_len: usize,
    pub ref_len: usize,
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
}

impl BleuStats {
    pub fn zero(max_n: usize) -> Self {
        Self {
            sys_len: 0,
            ref_len: 0,
            correct: vec![0; max_n],
            total: vec![0; max_n],
        }
    }

    pub fn add(&mut self, other: &BleuStats) {
        self.sys_len += other.sys_len;
        self.ref_len += other.ref_len;
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
    }
}

fn preprocess(text: &str, cfg: &BleuConfig) -> String {
    let text = text.trim_end_matches(is_py_space);
    if cfg.lowercase {
        cfg.tokenizer.tokenize_line(&text.to_lowercase())
    } else {
        cfg.tokenizer.tokenize_line(text)
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], max_n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    for n in 1..=max_n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Statistics for one hypothesis against one reference.
pub fn segment_stats(hyp: &str, reference: &str, cfg: &BleuConfig) -> BleuStats {
    let hyp = preprocess(hyp, cfg);
    let reference = preprocess(reference, cfg);
    let h: Vec<&str> = py_split(&hyp).collect();
    let r: Vec<&str> = py_split(&reference).collect();
    let ref_counts = ngram_counts(&r, cfg.max_n);
    let mut stats = BleuStats::zero(cfg.max_n);
    stats.sys_len = h.len();
    stats.ref_len = r.len();
    for (gram, count) in ngram_counts(&h, cfg.max_n) {
        let n = gram.len() - 1;
        stats.total[n] += count;
        if let Some(&rc) = ref_counts.get(gram) {
            stats.correct[n] += count.min(rc);
        }
    }
    stats
}

/// Score from aggregated statistics. `effective_order` drops orders that have
/// no n-grams at all, as sentence-level scoring does.
pub fn score_from_stats(stats: &BleuStats, cfg: &BleuConfig, effective_order: bool) -> BleuResult {
    let max_n = cfg.max_n;
    let bp = brevity_penalty(stats.sys_len, stats.ref_len);
    let mut precisions = vec![0.0f64; max_n];
    let signature = signature(cfg, 1);
    if stats.correct.iter().all(|&c| c == 0) {
        return BleuResult {
            score: 0.0,
            precisions,
            bp,
            sys_len: stats.sys_len,
            ref_len: stats.ref_len,
            signature,
        };
    }
    let mut smooth = 1.0f64;
    let mut eff_order = max_n;
    for n in 0..max_n {
        let total = stats.total[n];
        if total == 0 {
            break;
        }
        if effective_order {
            eff_order = n + 1;
        }
        let correct = stats.correct[n];
        if correct == 0 {
            if cfg.smoothing == Smoothing::Exp {
                smooth *= 2.0;
                precisions[n] = 100.0 / (smooth * total as f64);
            }
        } else {
            precisions[n] = 100.0 * correct as f64 / total as f64;
        }
    }
    let log_sum: f64 = precisions[..eff_order]
        .iter()
        .map(|&p| if p == 0.0 { LOG_ZERO } else { p.ln() })
        .sum();
    let score = bp * (log_sum / eff_order as f64).exp();
    BleuResult {
        score,
        precisions,
        bp,
        sys_len: stats.sys_len,
        ref_len: stats.ref_len,
        signature,
    }
}

pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(
    hyps: &[H],
    refs: &[R],
    cfg: &BleuConfig,
) -> Result<BleuResult, BleuError> {
    if cfg.max_n == 0 {
        return Err(BleuError::InvalidOrder);
    }
    if hyps.len() != refs.len() {
        return Err(BleuError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    let mut stats = BleuStats::zero(cfg.max_n);
    for (h, r) in hyps.iter().zip(refs) {
        stats.add(&segment_stats(h.as_ref(), r.as_ref(), cfg));
    }
    Ok(score_from_stats(&stats, cfg, false))
}

/// Sentence-level BLEU (effective order, same smoothing as the corpus scorer).
pub fn sentence_bleu(hyp: &str, reference: &str, cfg: &BleuConfig) -> Result<f64, BleuError> {
    if cfg.max_n == 0 {
        return Err(BleuError::InvalidOrder);
    }
    Ok(score_from_stats(&segment_stats(hyp, reference, cfg), cfg, true).score)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_13a_basics() {
        assert_eq!(tokenize_13a("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert!(tokenize_13a("").is_empty());
        assert_eq!(
            tokenize_13a("It costs 3.5 dollars."),
            ["It", "costs", "3.5", "dollars", "."]
        );
        assert_eq!(tokenize_13a("a&amp;b <skipped>c"), ["a", "&", "b", "c"]);
        assert_eq!(tokenize_13a("1,000-2"), ["1,000", "-", "2"]);
    }

    #[test]
    fn tokenizer_zh_basics() {
        assert_eq!(tokenize_zh("你好"), ["你", "好"]);
        assert_eq!(tokenize_zh("GPT模型"), ["GPT", "模", "型"]);
        assert!(tokenize_zh("").is_empty());
        // The curly quote sits inside the widened punctuation range.
        assert_eq!(tokenize_zh("“ok”"), ["“", "ok", "”"]);
    }

    #[test]
    fn brevity_penalty_rules() {
        assert_eq!(brevity_penalty(10, 10), 1.0);
        assert!((brevity_penalty(5, 10) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(brevity_penalty(0, 10), 0.0);
    }

    #[test]
    fn identity_and_empty() {
        let refs = [
            "The cat sat on the mat .",
            "A quick brown fox jumps over the dog",
        ];
        let r = corpus_bleu(&refs, &refs, &BleuConfig::default()).unwrap();
        assert!((r.score - 100.0).abs() < 1e-9);
        assert_eq!(r.bp, 1.0);
        assert!(r.precisions.iter().all(|&p| p == 100.0));
        let r = corpus_bleu(&["", ""], &refs, &BleuConfig::default()).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(r.bp, 0.0);
    }

    #[test]
    fn errors() {
        let cfg = BleuConfig::default();
        assert_eq!(
            corpus_bleu(&["a"], &["a", "b"], &cfg),
            Err(BleuError::LengthMismatch { hyps: 1, refs: 2 })
        );
        assert_eq!(
            corpus_bleu::<&str, &str>(&[], &[], &cfg),
            Err(BleuError::EmptyCorpus)
        );
        let bad = BleuConfig { max_n: 0, ..cfg };
        assert_eq!(
            corpus_bleu(&["a"], &["a"], &bad),
            Err(BleuError::InvalidOrder)
        );
    }

    #[test]
    fn signature_format() {
        let v = env!("CARGO_PKG_VERSION");
        assert_eq!(
            signature(&BleuConfig::default(), 1),
            format!("BLEU|nrefs:1|case:mixed|tok:13a|smooth:exp|v:{v}")
        );
        let zh = BleuConfig::for_target(Language::Zh);
        assert!(signature(&zh, 1).contains("tok:zh"));
        let lc = BleuConfig {
            lowercase: true,
            smoothing: Smoothing::None,
            ..zh
        };
        assert!(signature(&lc, 1).contains("case:lc|tok:zh|smooth:none"));
    }

    #[test]
    fn score_matches_closed_form_when_all_orders_match() {
        let hyp = ["the cat sat on the mat today"];
        let reference = ["the cat sat on the mat"];
        let r = corpus_bleu(&hyp, &reference, &BleuConfig::default()).unwrap();
        let expected = r.bp * (r.precisions.iter().map(|p| p.ln()).sum::<f64>() / 4.0).exp();
        assert!((r.score - expected).abs() < 1e-12);
    }
}
