//! Per-domain aggregation, normalization, significance tests, human-eval
//! tallies, epoch curves, and the report files built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::corpus::LangPair;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no scores to aggregate")]
    Empty,
    #[error("test set {0} has no segments")]
    NoSegments(String),
    #[error("duplicate test set {0}")]
    Duplicate(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("paired t-test needs at least 2 pairs, got {0}")]
    TooFew(usize),
    #[error("domain {0} has no positive score")]
    NonPositiveMax(String),
    #[error("grid shape does not match its labels")]
    Shape,
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Half-up rounding for display (`40.155 -> 40.16`), tolerant of binary
/// representation error just below the half. Negative values mirror positive ones.
pub fn round_half_up(x: f64, dp: u32) -> f64 {
    let scale = 10f64.powi(dp as i32);
    let r = (x.abs() * scale + 0.5 + 1e-9).floor() / scale;
    if x < 0.0 {
        -r
    } else {
        r
    }
}

pub fn fmt_2dp(x: f64) -> String {
    format!("{:.2}", round_half_up(x, 2))
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainScore {
    pub test_set: String,
    pub domain: String,
    pub metric: String,
    pub value: f64,
    pub n_segments: usize,
    pub in_domain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub lang_pair: LangPair,
    pub metric: String,
    pub domain_scores: Vec<DomainScore>,
    /// `None` when the direction has no in-domain sets.
    pub in_domain_avg: Option<f64>,
    pub ood_avg: Option<f64>,
    pub direction_avg: f64,
    pub signature: String,
}

impl EvalReport {
    pub fn score(&self, test_set: &str) -> Option<f64> {
        self.domain_scores
            .iter()
            .find(|s| s.test_set == test_set)
            .map(|s| s.value)
    }
}

/// Unweighted means over in-domain sets, the remaining sets, and all sets.
pub fn aggregate(
    system: &str,
    lang_pair: LangPair,
    scores: Vec<DomainScore>,
    signature: &str,
) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut seen = BTreeSet::new();
    for s in &scores {
        if s.n_segments == 0 {
            return Err(AnalysisError::NoSegments(s.test_set.clone()));
        }
        if !seen.insert(s.test_set.as_str()) {
            return Err(AnalysisError::Duplicate(s.test_set.clone()));
        }
    }
    let pick = |inside: bool| -> Vec<f64> {
        scores
            .iter()
            .filter(|s| s.in_domain == inside)
            .map(|s| s.value)
            .collect()
    };
    let all: Vec<f64> = scores.iter().map(|s| s.value).collect();
    Ok(EvalReport {
        system: system.to_string(),
        lang_pair,
        metric: scores[0].metric.clone(),
        in_domain_avg: mean(&pick(true)),
        ood_avg: mean(&pick(false)),
        direction_avg: mean(&all).expect("nonempty"),
        domain_scores: scores,
        signature: signature.to_string(),
    })
}

/// Unweighted mean of the per-direction averages.
pub fn cross_direction_avg(reports: &[EvalReport]) -> Result<f64> {
    let avgs: Vec<f64> = reports.iter().map(|r| r.direction_avg).collect();
    mean(&avgs).ok_or(AnalysisError::Empty)
}

/// Systems × domains score matrix; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreGrid {
    pub systems: Vec<String>,
    pub domains: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl ScoreGrid {
    pub fn from_reports(reports: &[EvalReport]) -> Self {
        let mut domains: Vec<String> = Vec::new();
        for r in reports {
            for s in &r.domain_scores {
                if !domains.contains(&s.test_set) {
                    domains.push(s.test_set.clone());
                }
            }
        }
        let values = reports
            .iter()
            .map(|r| domains.iter().map(|d| r.score(d)).collect())
            .collect();
        Self {
            systems: reports.iter().map(|r| r.system.clone()).collect(),
            domains,
            values,
        }
    }

    fn check(&self) -> Result<()> {
        if self.values.len() != self.systems.len()
            || self
                .values
                .iter()
                .any(|row| row.len() != self.domains.len())
        {
            return Err(AnalysisError::Shape);
        }
        Ok(())
    }
}

/// Divides each cell by the maximum of its domain column.
pub fn normalize_by_domain_max(grid: &ScoreGrid) -> Result<ScoreGrid> {
    grid.check()?;
    let mut out = grid.clone();
    for (j, domain) in grid.domains.iter().enumerate() {
        let max = grid
            .values
            .iter()
            .filter_map(|row| row[j])
            .fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0) {
            return Err(AnalysisError::NonPositiveMax(domain.clone()));
        }
        for row in out.values.iter_mut() {
            if let Some(v) = row[j].as_mut() {
                *v /= max;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

/// Two-sided paired t-test on `a - b`.
///
/// With zero variance in the differences the statistic is undefined; identical
/// inputs give `t = 0, p = 1`, a constant nonzero shift gives `t = ±inf, p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(AnalysisError::TooFew(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let md = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - md) * (x - md)).sum::<f64>() / (n - 1) as f64;
    let (t, p) = if var == 0.0 {
        if md == 0.0 {
            (0.0, 1.0)
        } else {
            (md.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = md / (var / n as f64).sqrt();
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(TTest {
        n,
        mean_diff: md,
        t,
        p,
        significant: p < 0.05,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgment {
    Win,
    Lose,
    Tie,
}

impl std::str::FromStr for Judgment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "win" => Ok(Judgment::Win),
            "lose" | "loss" => Ok(Judgment::Lose),
            "tie" => Ok(Judgment::Tie),
            other => Err(format!(
                "unknown judgment {other:?} (expected win, lose or tie)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEvalTally {
    pub label: String,
    pub win: usize,
    pub lose: usize,
    pub tie: usize,
    pub total: usize,
    /// Percentages at one decimal, half-up.
    pub win_pct: f64,
    pub lose_pct: f64,
    pub tie_pct: f64,
}

impl HumanEvalTally {
    pub fn from_counts(label: &str, win: usize, lose: usize, tie: usize) -> Result<Self> {
        let total = win + lose + tie;
        if total == 0 {
            return Err(AnalysisError::Empty);
        }
        let pct = |k: usize| round_half_up(k as f64 * 100.0 / total as f64, 1);
        Ok(Self {
            label: label.to_string(),
            win,
            lose,
            tie,
            total,
            win_pct: pct(win),
            lose_pct: pct(lose),
            tie_pct: pct(tie),
        })
    }
}

pub fn tally_human_eval(judgments: &[Judgment], label: &str) -> Result<HumanEvalTally> {
    let count = |j: Judgment| judgments.iter().filter(|&&x| x == j).count();
    HumanEvalTally::from_counts(
        label,
        count(Judgment::Win),
        count(Judgment::Lose),
        count(Judgment::Tie),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: u32,
    pub in_domain_avg: f64,
    pub ood_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochCurve {
    pub rows: Vec<EpochRow>,
    pub best_in_domain_epoch: u32,
    pub best_ood_epoch: u32,
}

fn argmax_epoch(rows: &[EpochRow], f: impl Fn(&EpochRow) -> f64) -> u32 {
    // Rows are epoch-ascending; the earliest maximum wins.
    let mut best = &rows[0];
    for r in &rows[1..] {
        if f(r) > f(best) {
            best = r;
        }
    }
    best.epoch
}

pub fn epoch_curve(series: &BTreeMap<u32, (f64, f64)>) -> Result<EpochCurve> {
    if series.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let rows: Vec<EpochRow> = series
        .iter()
        .map(|(&epoch, &(in_domain_avg, ood_avg))| EpochRow {
            epoch,
            in_domain_avg,
            ood_avg,
        })
        .collect();
    Ok(EpochCurve {
        best_in_domain_epoch: argmax_epoch(&rows, |r| r.in_domain_avg),
        best_ood_epoch: argmax_epoch(&rows, |r| r.ood_avg),
        rows,
    })
}

impl EpochCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,in_domain_avg,ood_avg\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.epoch, r.in_domain_avg, r.ood_avg);
        }
        s
    }
}

/// Which scores a significance test pairs up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PairingUnit {
    /// One corpus score per test set within the group.
    #[default]
    TestSet,
    /// One sentence-level score per segment within the group.
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    InDomain,
    Ood,
    All,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::InDomain, Group::Ood, Group::All];

    pub fn name(self) -> &'static str {
        match self {
            Group::InDomain => "in-domain",
            Group::Ood => "ood",
            Group::All => "all",
        }
    }

    pub fn contains(self, in_domain: bool) -> bool {
        match self {
            Group::InDomain => in_domain,
            Group::Ood => !in_domain,
            Group::All => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub lang_pair: LangPair,
    pub metric: String,
    pub group: Group,
    pub unit: PairingUnit,
    pub system_a: String,
    pub system_b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    #[serde(flatten)]
    pub test: TTest,
}

/// Test-set-level comparison of two reports of the same direction, one row per
/// group with at least two shared test sets.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Vec<TTestRow> {
    let mut rows = Vec::new();
    for group in Group::ALL {
        let (mut xa, mut xb) = (Vec::new(), Vec::new());
        for s in a
            .domain_scores
            .iter()
            .filter(|s| group.contains(s.in_domain))
        {
            if let Some(v) = b.score(&s.test_set) {
                xa.push(s.value);
                xb.push(v);
            }
        }
        if let Ok(test) = paired_t_test(&xa, &xb) {
            rows.push(TTestRow {
                lang_pair: a.lang_pair,
                metric: a.metric.clone(),
                group,
                unit: PairingUnit::TestSet,
                system_a: a.system.clone(),
                system_b: b.system.clone(),
                mean_a: mean(&xa).unwrap_or(0.0),
                mean_b: mean(&xb).unwrap_or(0.0),
                test,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricStatus {
    Available,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDirection {
    pub system: String,
    pub metric: String,
    pub directions: Vec<LangPair>,
    pub avg: f64,
}

/// Everything a `report` run writes, serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub harness_version: String,
    pub bleu: Vec<EvalReport>,
    pub comet_status: MetricStatus,
    pub comet: Vec<EvalReport>,
    pub cross_direction: Vec<CrossDirection>,
    pub ttests: Vec<TTestRow>,
}

impl RunReport {
    /// Builds cross-direction averages (systems covering several directions)
    /// and test-set-level t-tests for every system pair within a direction.
    pub fn build(bleu: Vec<EvalReport>, comet: Option<Vec<EvalReport>>) -> Self {
        let comet_status = if comet.is_some() {
            MetricStatus::Available
        } else {
            MetricStatus::Unavailable
        };
        let comet = comet.unwrap_or_default();
        let mut cross_direction = Vec::new();
        let mut ttests = Vec::new();
        for reports in [&bleu, &comet] {
            let mut by_system: BTreeMap<(&str, &str), Vec<&EvalReport>> = BTreeMap::new();
            let mut by_pair: BTreeMap<(LangPair, &str), Vec<&EvalReport>> = BTreeMap::new();
            for r in reports.iter() {
                by_system.entry((&r.system, &r.metric)).or_default().push(r);
                by_pair.entry((r.lang_pair, &r.metric)).or_default().push(r);
            }
            for ((system, metric), rs) in by_system {
                let owned: Vec<EvalReport> = rs.iter().map(|r| (*r).clone()).collect();
                if let Ok(avg) = cross_direction_avg(&owned) {
                    cross_direction.push(CrossDirection {
                        system: system.to_string(),
                        metric: metric.to_string(),
                        directions: rs.iter().map(|r| r.lang_pair).collect(),
                        avg,
                    });
                }
            }
            for rs in by_pair.values() {
                for i in 0..rs.len() {
                    for j in i + 1..rs.len() {
                        ttests.extend(compare_reports(rs[i], rs[j]));
                    }
                }
            }
        }
        Self {
            harness_version: env!("CARGO_PKG_VERSION").to_string(),
            bleu,
            comet_status,
            comet,
            cross_direction,
            ttests,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Long-format table: one row per test-set score plus the three averages.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "system,lang_pair,metric,row,test_set,domain,in_domain,n_segments,value,display\n",
        );
        let comet_missing = self.comet_status == MetricStatus::Unavailable;
        for r in self.bleu.iter().chain(&self.comet) {
            for d in &r.domain_scores {
                let _ = writeln!(
                    s,
                    "{},{},{},score,{},{},{},{},{},{}",
                    csv_field(&r.system),
                    r.lang_pair,
                    r.metric,
                    csv_field(&d.test_set),
                    csv_field(&d.domain),
                    d.in_domain,
                    d.n_segments,
                    d.value,
                    fmt_2dp(d.value)
                );
            }
            for (row, v) in [
                ("in_domain_avg", r.in_domain_avg),
                ("ood_avg", r.ood_avg),
                ("direction_avg", Some(r.direction_avg)),
            ] {
                if let Some(v) = v {
                    let _ = writeln!(
                        s,
                        "{},{},{},{row},,,,,{v},{}",
                        csv_field(&r.system),
                        r.lang_pair,
                        r.metric,
                        fmt_2dp(v)
                    );
                }
            }
            if comet_missing {
                let _ = writeln!(
                    s,
                    "{},{},comet,direction_avg,,,,,,unavailable",
                    csv_field(&r.system),
                    r.lang_pair
                );
            }
        }
        s
    }

    /// Max-normalized scores per direction and metric, long format.
    pub fn radar_csv(&self) -> Result<String> {
        let mut s = String::from("lang_pair,metric,system,test_set,value,normalized\n");
        for reports in [&self.bleu, &self.comet] {
            let mut groups: BTreeMap<(LangPair, &str), Vec<EvalReport>> = BTreeMap::new();
            for r in reports.iter() {
                groups
                    .entry((r.lang_pair, &r.metric))
                    .or_default()
                    .push(r.clone());
            }
            for ((pair, metric), rs) in groups {
                let grid = ScoreGrid::from_reports(&rs);
                let norm = normalize_by_domain_max(&grid)?;
                for (i, system) in grid.systems.iter().enumerate() {
                    for (j, domain) in grid.domains.iter().enumerate() {
                        if let (Some(v), Some(n)) = (grid.values[i][j], norm.values[i][j]) {
                            let _ = writeln!(
                                s,
                                "{pair},{metric},{},{},{v},{n}",
                                csv_field(system),
                                csv_field(domain)
                            );
                        }
                    }
                }
            }
        }
        Ok(s)
    }

    pub fn ttest_csv(&self) -> String {
        let mut s = String::from(
            "lang_pair,metric,group,unit,system_a,system_b,n,mean_a,mean_b,mean_diff,t,p,significant\n",
        );
        for r in &self.ttests {
            let unit = match r.unit {
                PairingUnit::TestSet => "test-set",
                PairingUnit::Segment => "segment",
            };
            let _ = writeln!(
                s,
                "{},{},{},{unit},{},{},{},{},{},{},{},{},{}",
                r.lang_pair,
                r.metric,
                r.group.name(),
                csv_field(&r.system_a),
                csv_field(&r.system_b),
                r.test.n,
                r.mean_a,
                r.mean_b,
                r.test.mean_diff,
                r.test.t,
                r.test.p,
                r.test.significant
            );
        }
        s
    }

    /// Plain-text summary table of the averages.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<24} {:<6} {:<6} {:>9} {:>9} {:>9}\n",
            "system", "pair", "metric", "in-domain", "ood", "avg"
        );
        let opt = |v: Option<f64>| v.map(fmt_2dp).unwrap_or_else(|| "-".into());
        for r in self.bleu.iter().chain(&self.comet) {
            let _ = writeln!(
                s,
                "{:<24} {:<6} {:<6} {:>9} {:>9} {:>9}",
                r.system,
                r.lang_pair.to_string(),
                r.metric,
                opt(r.in_domain_avg),
                opt(r.ood_avg),
                fmt_2dp(r.direction_avg)
            );
        }
        if self.comet_status == MetricStatus::Unavailable {
            s.push_str("COMET: unavailable (no scorer configured)\n");
        }
        for c in &self.cross_direction {
            let _ = writeln!(
                s,
                "{} {} cross-direction avg: {}",
                c.system,
                c.metric,
                fmt_2dp(c.avg)
            );
        }
        s
    }

    /// Writes `report.json`, `report.csv`, `radar.csv`, `ttest.csv` and `report.txt` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| AnalysisError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("report.json"), self.to_json()).map_err(io)?;
        fs::write(dir.join("report.csv"), self.to_csv()).map_err(io)?;
        fs::write(dir.join("radar.csv"), self.radar_csv()?).map_err(io)?;
        fs::write(dir.join("ttest.csv"), self.ttest_csv()).map_err(io)?;
        fs::write(dir.join("report.txt"), self.to_table()).map_err(io)?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// JSON Schema for `report.json`; the CSV columns are described in its `x-csv` section.
pub const REPORT_SCHEMA: &str = include_str!("../data/report.schema.json");
