//! Parallel corpora: test sets, training stores and the test-set registry.
//!
//! Corpus files hold one record per line, either tab-separated
//! `source<TAB>reference` (any extension other than `.jsonl`) or JSON lines
//! with `{"src": ..., "ref": ...}` objects (`.jsonl`). Both are UTF-8.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

const BUNDLED_REGISTRY: &str = include_str!("../data/registry.csv");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{0}: file contains no records")]
    Empty(PathBuf),
    #[error("unknown language pair `{0}` (expected one of de-en, en-de, zh-en, en-zh)")]
    InvalidPair(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("cannot sample {requested} pairs from domain `{domain}` of size {available}")]
    SampleTooLarge {
        domain: String,
        requested: usize,
        available: usize,
    },
    #[error("test set `{id}` ({pair}) is not in the registry")]
    UnknownTestSet { pair: LangPair, id: String },
    #[error("registry: {0}")]
    Registry(String),
    #[error("cannot write `{0}` as TSV: text contains a tab or newline")]
    Unrepresentable(String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    De,
    En,
    Zh,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::De => "de",
            Language::En => "en",
            Language::Zh => "zh",
        }
    }

    /// English name used as the line label in prompts ("German:", ...).
    pub fn name(self) -> &'static str {
        match self {
            Language::De => "German",
            Language::En => "English",
            Language::Zh => "Chinese",
        }
    }
}

impl FromStr for Language {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "de" => Ok(Language::De),
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(CorpusError::InvalidPair(other.to_string())),
        }
    }
}

/// A translation direction. Only de↔en and zh↔en are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LangPair {
    src: Language,
    tgt: Language,
}

impl LangPair {
    pub const DE_EN: LangPair = LangPair {
        src: Language::De,
        tgt: Language::En,
    };
    pub const EN_DE: LangPair = LangPair {
        src: Language::En,
        tgt: Language::De,
    };
    pub const ZH_EN: LangPair = LangPair {
        src: Language::Zh,
        tgt: Language::En,
    };
    pub const EN_ZH: LangPair = LangPair {
        src: Language::En,
        tgt: Language::Zh,
    };
    pub const ALL: [LangPair; 4] = [Self::DE_EN, Self::EN_DE, Self::ZH_EN, Self::EN_ZH];

    pub fn new(src: Language, tgt: Language) -> Result<Self> {
        use Language::*;
        match (src, tgt) {
            (De, En) | (En, De) | (Zh, En) | (En, Zh) => Ok(Self { src, tgt }),
            _ => Err(CorpusError::InvalidPair(format!(
                "{}-{}",
                src.code(),
                tgt.code()
            ))),
        }
    }

    pub fn src(self) -> Language {
        self.src
    }

    pub fn tgt(self) -> Language {
        self.tgt
    }

    /// The non-English language of the pair; hint catalogs are shared per family.
    pub fn foreign(self) -> Language {
        if self.src == Language::En {
            self.tgt
        } else {
            self.src
        }
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src.code(), self.tgt.code())
    }
}

impl FromStr for LangPair {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| CorpusError::InvalidPair(s.to_string()))?;
        let pair = LangPair::new(a.parse()?, b.parse()?);
        pair.map_err(|_| CorpusError::InvalidPair(s.to_string()))
    }
}

impl Serialize for LangPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LangPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentPair {
    pub index: usize,
    pub source: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub id: String,
    pub lang_pair: LangPair,
    pub domain: String,
    pub segments: Vec<SegmentPair>,
    pub provenance: String,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.source.as_str())
    }

    pub fn references(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.reference.as_str())
    }
}

#[derive(Deserialize, Serialize)]
struct JsonRecord {
    src: String,
    #[serde(rename = "ref")]
    reference: String,
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses the `(source, reference)` records of a corpus file in file order.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read(path)?;
    let json = is_jsonl(path);
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let malformed = |reason: &str| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            reason: reason.to_string(),
        };
        let (src, reference) = if json {
            let rec: JsonRecord =
                serde_json::from_str(line).map_err(|e| malformed(&e.to_string()))?;
            (rec.src, rec.reference)
        } else {
            let mut fields = line.split('\t');
            let src = fields.next().unwrap_or_default();
            let reference = fields
                .next()
                .ok_or_else(|| malformed("missing reference field"))?;
            if fields.next().is_some() {
                return Err(malformed("more than two tab-separated fields"));
            }
            (src.to_string(), reference.to_string())
        };
        if src.is_empty() {
            return Err(malformed("empty source"));
        }
        if reference.is_empty() {
            return Err(malformed("empty reference"));
        }
        out.push((src, reference));
    }
    if out.is_empty() {
        return Err(CorpusError::Empty(path.to_path_buf()));
    }
    Ok(out)
}

fn index_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Vec<SegmentPair> {
    pairs
        .into_iter()
        .enumerate()
        .map(|(index, (source, reference))| SegmentPair {
            index,
            source,
            reference,
        })
        .collect()
}

/// Loads a test set; the id is the file stem. Test sets are never deduplicated.
pub fn load_testset(path: &Path, lang_pair: LangPair, domain: &str) -> Result<TestSet> {
    let pairs = read_pairs(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(TestSet {
        id,
        lang_pair,
        domain: domain.to_string(),
        segments: index_pairs(pairs),
        provenance: path.display().to_string(),
    })
}

/// Canonical serialization: LF line endings, one record per line, trailing newline.
pub fn write_testset(ts: &TestSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    for seg in &ts.segments {
        if is_jsonl(path) {
            let rec = JsonRecord {
                src: seg.source.clone(),
                reference: seg.reference.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("string record serializes"));
        } else {
            for text in [&seg.source, &seg.reference] {
                if text.contains(['\t', '\n', '\r']) {
                    return Err(CorpusError::Unrepresentable(text.clone()));
                }
            }
            out.push_str(&seg.source);
            out.push('\t');
            out.push_str(&seg.reference);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-domain training data for one direction, deduplicated on ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingStore {
    pub lang_pair: LangPair,
    by_domain: BTreeMap<String, Vec<SegmentPair>>,
}

impl TrainingStore {
    pub fn new(lang_pair: LangPair) -> Self {
        Self {
            lang_pair,
            by_domain: BTreeMap::new(),
        }
    }

    /// Adds pairs to a domain, dropping exact `(source, reference)` duplicates
    /// (both within the batch and against what the domain already holds).
    pub fn ingest(&mut self, domain: &str, pairs: impl IntoIterator<Item = (String, String)>) {
        let entry = self.by_domain.entry(domain.to_string()).or_default();
        let mut seen: HashSet<(String, String)> = entry
            .iter()
            .map(|p| (p.source.clone(), p.reference.clone()))
            .collect();
        for (source, reference) in pairs {
            if seen.insert((source.clone(), reference.clone())) {
                let index = entry.len();
                entry.push(SegmentPair {
                    index,
                    source,
                    reference,
                });
            }
        }
        if entry.is_empty() {
            self.by_domain.remove(domain);
        }
    }

    /// Loads every corpus file in `dir`; the file stem names the domain.
    pub fn load_dir(dir: &Path, lang_pair: LangPair) -> Result<Self> {
        let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut store = Self::new(lang_pair);
        for file in files {
            let domain = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            store.ingest(&domain, read_pairs(&file)?);
        }
        Ok(store)
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.by_domain.keys().map(String::as_str)
    }

    pub fn domain(&self, domain: &str) -> Result<&[SegmentPair]> {
        self.by_domain
            .get(domain)
            .map(Vec::as_slice)
            .ok_or_else(|| CorpusError::UnknownDomain(domain.to_string()))
    }

    /// All pairs across domains, re-indexed in domain order.
    pub fn all_pairs(&self) -> Vec<SegmentPair> {
        index_pairs(
            self.by_domain
                .values()
                .flatten()
                .map(|p| (p.source.clone(), p.reference.clone())),
        )
    }
}

/// Uniform sample of `n` distinct pairs without replacement, re-indexed `0..n`.
pub fn sample_training(
    store: &TrainingStore,
    domain: &str,
    n: usize,
    seed: u64,
) -> Result<Vec<SegmentPair>> {
    let pool = store.domain(domain)?;
    if n > pool.len() {
        return Err(CorpusError::SampleTooLarge {
            domain: domain.to_string(),
            requested: n,
            available: pool.len(),
        });
    }
    let picks = SeededRng::new(seed).sample_indices(pool.len(), n);
    Ok(picks
        .into_iter()
        .enumerate()
        .map(|(index, i)| SegmentPair {
            index,
            ..pool[i].clone()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub count: usize,
    pub in_domain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryRow {
    pub pair: LangPair,
    pub id: String,
    pub count: usize,
    pub in_domain: bool,
}

/// Known test sets with their expected sizes and in-domain flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    entries: BTreeMap<(LangPair, String), RegistryEntry>,
    order: Vec<(LangPair, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Validation {
    Ok,
    SizeMismatch { expected: usize, got: usize },
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }
}

impl Registry {
    /// The De↔En and Zh↔En test sets shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_REGISTRY).expect("bundled registry is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&read(path)?)
    }

    /// Parses `pair,id,count,in_domain` rows; every pair present must have
    /// exactly four in-domain sets.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        let mut order = Vec::new();
        for row in reader.deserialize::<RegistryRow>() {
            let row = row.map_err(|e| CorpusError::Registry(e.to_string()))?;
            let key = (row.pair, row.id.clone());
            let entry = RegistryEntry {
                count: row.count,
                in_domain: row.in_domain,
            };
            if entries.insert(key.clone(), entry).is_some() {
                return Err(CorpusError::Registry(format!(
                    "duplicate entry {} {}",
                    row.pair, row.id
                )));
            }
            order.push(key);
        }
        let reg = Self { entries, order };
        for pair in reg.pairs() {
            let n = reg.entries_for(pair).filter(|(_, e)| e.in_domain).count();
            if n != 4 {
                return Err(CorpusError::Registry(format!(
                    "{pair} has {n} in-domain test sets, expected 4"
                )));
            }
        }
        Ok(reg)
    }

    pub fn get(&self, pair: LangPair, id: &str) -> Option<RegistryEntry> {
        self.entries.get(&(pair, id.to_string())).copied()
    }

    pub fn pairs(&self) -> BTreeSet<LangPair> {
        self.entries.keys().map(|(p, _)| *p).collect()
    }

    /// Entries for one direction in file order.
    pub fn entries_for(&self, pair: LangPair) -> impl Iterator<Item = (&str, RegistryEntry)> {
        self.order
            .iter()
            .filter(move |(p, _)| *p == pair)
            .map(|k| (k.1.as_str(), self.entries[k]))
    }

    pub fn in_domain_ids(&self, pair: LangPair) -> Vec<&str> {
        self.entries_for(pair)
            .filter(|(_, e)| e.in_domain)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn validate_against_registry(ts: &TestSet, reg: &Registry) -> Result<Validation> {
    let entry = reg
        .get(ts.lang_pair, &ts.id)
        .ok_or_else(|| CorpusError::UnknownTestSet {
            pair: ts.lang_pair,
            id: ts.id.clone(),
        })?;
    Ok(if entry.count == ts.len() {
        Validation::Ok
    } else {
        Validation::SizeMismatch {
            expected: entry.count,
            got: ts.len(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmpfile(name: &str, body: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        (dir, path)
    }

    fn synthetic(n: usize) -> String {
        (0..n).map(|i| format!("src {i}\tref {i}\n")).collect()
    }

    #[test]
    fn two_line_tsv() {
        let (_d, p) = tmpfile("toy.tsv", "a\tb\nc\td\n");
        let ts = load_testset(&p, LangPair::DE_EN, "toy").unwrap();
        assert_eq!(ts.id, "toy");
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.segments[0].index, 0);
        assert_eq!(ts.segments[1].index, 1);
        assert_eq!(ts.segments[1].source, "c");
        assert_eq!(ts.segments[1].reference, "d");
    }

    #[test]
    fn covid_sized_file() {
        let (_d, p) = tmpfile("Covid.tsv", &synthetic(3325));
        let ts = load_testset(&p, LangPair::DE_EN, "Covid").unwrap();
        assert_eq!(ts.len(), 3325);
        assert!(validate_against_registry(&ts, &Registry::bundled())
            .unwrap()
            .is_ok());
    }

    #[test]
    fn missing_reference_names_line() {
        let (_d, p) = tmpfile("bad.tsv", "a\tb\nonly-source\nc\td\n");
        match load_testset(&p, LangPair::DE_EN, "x") {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let (_d, p) = tmpfile("bad2.tsv", "a\tb\nc\t\n");
        assert!(matches!(
            load_testset(&p, LangPair::DE_EN, "x"),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn empty_and_missing_files() {
        let (_d, p) = tmpfile("empty.tsv", "");
        assert!(matches!(
            load_testset(&p, LangPair::DE_EN, "x"),
            Err(CorpusError::Empty(_))
        ));
        assert!(matches!(
            load_testset(Path::new("/nonexistent/x.tsv"), LangPair::DE_EN, "x"),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn jsonl_variant() {
        let (_d, p) = tmpfile(
            "j.jsonl",
            "{\"src\":\"Hallo\\tWelt\",\"ref\":\"Hello world\"}\n{\"src\":\"x\",\"ref\":\"y\"}\n",
        );
        let ts = load_testset(&p, LangPair::DE_EN, "j").unwrap();
        assert_eq!(ts.segments[0].source, "Hallo\tWelt");
        let (_d2, p2) = tmpfile("j.jsonl", "{\"src\":\"x\"}\n");
        assert!(matches!(
            load_testset(&p2, LangPair::DE_EN, "j"),
            Err(CorpusError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn crlf_is_canonicalized_on_write() {
        let (d, p) = tmpfile("c.tsv", "a\tb\r\nc\td");
        let ts = load_testset(&p, LangPair::DE_EN, "c").unwrap();
        let out = d.path().join("out.tsv");
        write_testset(&ts, &out).unwrap();
        assert_eq!(fs::read_to_string(out).unwrap(), "a\tb\nc\td\n");
    }

    #[test]
    fn tsv_write_rejects_tabs() {
        let ts = TestSet {
            id: "x".into(),
            lang_pair: LangPair::DE_EN,
            domain: "x".into(),
            segments: index_pairs([("a\tb".to_string(), "c".to_string())]),
            provenance: String::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(write_testset(&ts, &dir.path().join("x.tsv")).is_err());
        write_testset(&ts, &dir.path().join("x.jsonl")).unwrap();
    }

    #[test]
    fn lang_pairs() {
        assert_eq!("de-en".parse::<LangPair>().unwrap(), LangPair::DE_EN);
        assert_eq!(LangPair::EN_ZH.to_string(), "en-zh");
        assert!("de-zh".parse::<LangPair>().is_err());
        assert!("en-en".parse::<LangPair>().is_err());
        assert!(LangPair::new(Language::De, Language::De).is_err());
        assert_eq!(LangPair::EN_DE.foreign(), Language::De);
    }

    #[test]
    fn registry_tables() {
        let reg = Registry::bundled();
        assert_eq!(reg.entries_for(LangPair::DE_EN).count(), 25);
        assert_eq!(reg.entries_for(LangPair::EN_DE).count(), 25);
        assert_eq!(reg.entries_for(LangPair::ZH_EN).count(), 22);
        assert_eq!(reg.entries_for(LangPair::EN_ZH).count(), 22);
        for pair in LangPair::ALL {
            let total = reg.entries_for(pair).count();
            let inside = reg.in_domain_ids(pair).len();
            assert_eq!((inside, total - inside), (4, total - 4));
        }
        assert_eq!(
            reg.in_domain_ids(LangPair::DE_EN),
            ["IT(OPUS)", "Medical", "Law", "Subtitles"]
        );
        assert_eq!(
            reg.in_domain_ids(LangPair::EN_ZH),
            ["News", "Science", "Law", "Subtitles"]
        );
        assert_eq!(reg.get(LangPair::DE_EN, "Tedtalk14").unwrap().count, 1305);
        assert_eq!(reg.get(LangPair::DE_EN, "RF").unwrap().count, 151);
        assert_eq!(
            reg.get(LangPair::EN_DE, "Mixed(WMT22)").unwrap().count,
            2037
        );
        assert_eq!(reg.get(LangPair::ZH_EN, "Bio(WMT22)").unwrap().count, 264);
        assert_eq!(reg.get(LangPair::EN_ZH, "News(WMT19)").unwrap().count, 1997);
    }

    #[test]
    fn registry_requires_four_in_domain() {
        let csv = "pair,id,count,in_domain\nde-en,A,1,true\nde-en,B,1,false\n";
        assert!(Registry::from_csv(csv).is_err());
    }

    fn set_of(n: usize, id: &str) -> TestSet {
        TestSet {
            id: id.into(),
            lang_pair: LangPair::DE_EN,
            domain: id.into(),
            segments: index_pairs((0..n).map(|i| (format!("s{i}"), format!("r{i}")))),
            provenance: String::new(),
        }
    }

    #[test]
    fn registry_validation() {
        let reg = Registry::bundled();
        assert_eq!(
            validate_against_registry(&set_of(1305, "Tedtalk14"), &reg).unwrap(),
            Validation::Ok
        );
        assert_eq!(
            validate_against_registry(&set_of(1304, "Tedtalk14"), &reg).unwrap(),
            Validation::SizeMismatch {
                expected: 1305,
                got: 1304
            }
        );
        assert_eq!(
            validate_against_registry(&set_of(151, "RF"), &reg).unwrap(),
            Validation::Ok
        );
        assert!(matches!(
            validate_against_registry(&set_of(3, "Nope"), &reg),
            Err(CorpusError::UnknownTestSet { .. })
        ));
    }

    fn store_with(domain: &str, n: usize) -> TrainingStore {
        let mut s = TrainingStore::new(LangPair::DE_EN);
        s.ingest(domain, (0..n).map(|i| (format!("s{i}"), format!("r{i}"))));
        s
    }

    #[test]
    fn ingestion_dedups() {
        let mut s = TrainingStore::new(LangPair::DE_EN);
        s.ingest(
            "Law",
            [
                ("a".to_string(), "b".to_string()),
                ("a".to_string(), "b".to_string()),
                ("a".to_string(), "c".to_string()),
            ],
        );
        s.ingest("Law", [("a".to_string(), "c".to_string())]);
        assert_eq!(s.domain("Law").unwrap().len(), 2);
    }

    #[test]
    fn exhaustive_sample_is_permutation() {
        let store = store_with("Medical", 20);
        let out = sample_training(&store, "Medical", 20, 3).unwrap();
        let mut sources: Vec<_> = out.iter().map(|p| p.source.clone()).collect();
        sources.sort();
        let mut expected: Vec<_> = (0..20).map(|i| format!("s{i}")).collect();
        expected.sort();
        assert_eq!(sources, expected);
        assert!(out.iter().enumerate().all(|(i, p)| p.index == i));
    }

    #[test]
    fn sampling_is_deterministic() {
        let store = store_with("Medical", 12000);
        let a = sample_training(&store, "Medical", 10000, 7).unwrap();
        let b = sample_training(&store, "Medical", 10000, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_training(&store, "Medical", 10000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_errors() {
        let store = store_with("Medical", 5);
        assert!(matches!(
            sample_training(&store, "Medical", 6, 0),
            Err(CorpusError::SampleTooLarge { .. })
        ));
        assert!(matches!(
            sample_training(&store, "Law", 1, 0),
            Err(CorpusError::UnknownDomain(_))
        ));
    }

    #[test]
    fn single_draw_frequencies_are_uniform() {
        // 1000 draws over 4 items: each expected 250, binomial sd ≈ 13.7, so ±50 is > 3.6 sd.
        let store = store_with("IT", 4);
        let mut counts = [0usize; 4];
        for seed in 0..1000 {
            let pick = &sample_training(&store, "IT", 1, seed).unwrap()[0];
            let i: usize = pick.source[1..].parse().unwrap();
            counts[i] += 1;
        }
        for c in counts {
            assert!((200..=300).contains(&c), "{counts:?}");
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - 250.0).powi(2) / 250.0)
            .sum();
        // chi-square with 3 dof, 99.9th percentile ≈ 16.27
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }
}
