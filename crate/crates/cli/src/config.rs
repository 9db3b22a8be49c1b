//! Run configuration: one TOML file, paths resolved against its directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mtbench_infer::EndpointConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `{bench_root}/{pair}/{test_set}.tsv|.jsonl`
    pub bench_root: Option<PathBuf>,
    /// `{train_root}/{pair}/{domain}.tsv|.jsonl`
    pub train_root: Option<PathBuf>,
    /// Replaces the bundled test-set registry.
    pub registry: Option<PathBuf>,
    /// `{hints_dir}/{pair}.toml` replaces the bundled hint catalog for that pair.
    pub hints_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerConfig {
    pub url: String,
    #[serde(default = "default_scorer_batch")]
    pub batch_size: usize,
    #[serde(default = "default_scorer_timeout")]
    pub timeout_secs: f64,
}

fn default_scorer_batch() -> usize {
    64
}

fn default_scorer_timeout() -> f64 {
    300.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub ft_domains: Vec<String>,
    #[serde(default = "default_per_domain")]
    pub per_domain: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub hint_domains: Vec<String>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            ft_domains: Vec::new(),
            per_domain: default_per_domain(),
            alpha: default_alpha(),
            hint_domains: Vec::new(),
        }
    }
}

fn default_per_domain() -> usize {
    10_000
}

fn default_alpha() -> f64 {
    0.1
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default)]
    pub lowercase: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root for every generated artifact.
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strict: bool,
    /// `translate` exits with code 3 when the failed-segment fraction exceeds this.
    #[serde(default)]
    pub max_failure_rate: f64,
    #[serde(default)]
    pub data: DataConfig,
    /// Endpoint per system id.
    #[serde(default)]
    pub endpoints: BTreeMap<String, EndpointConfig>,
    pub scorer: Option<ScorerConfig>,
    #[serde(default)]
    pub datasets: DatasetConfig,
    #[serde(default)]
    pub metrics: MetricConfig,
}

fn default_work_dir() -> PathBuf {
    PathBuf::from("mtbench-run")
}

fn default_concurrency() -> usize {
    8
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.work_dir);
        for p in [
            &mut self.cache_dir,
            &mut self.data.bench_root,
            &mut self.data.train_root,
            &mut self.data.registry,
            &mut self.data.hints_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.concurrency == 0 {
            bail!("concurrency must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            bail!("max_failure_rate must lie in [0, 1]");
        }
        for (name, p) in [
            ("data.bench_root", &self.data.bench_root),
            ("data.train_root", &self.data.train_root),
            ("data.registry", &self.data.registry),
            ("data.hints_dir", &self.data.hints_dir),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("{name} {} does not exist", p.display());
                }
            }
        }
        for (system, ep) in &self.endpoints {
            ep.validate()
                .with_context(|| format!("endpoint `{system}`"))?;
        }
        if let Some(s) = &self.scorer {
            if s.batch_size == 0 {
                bail!("scorer.batch_size must be >= 1");
            }
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.work_dir.join("cache"))
    }

    pub fn records_dir(&self) -> PathBuf {
        self.work_dir.join("records")
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.work_dir.join("scores")
    }

    pub fn bench_root(&self) -> Result<&Path> {
        self.data
            .bench_root
            .as_deref()
            .context("data.bench_root is not configured")
    }

    pub fn train_root(&self) -> Result<&Path> {
        self.data
            .train_root
            .as_deref()
            .context("data.train_root is not configured")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "seed = 7\n[data]\nbench_root = \"bench\"\n[endpoints.ft]\nbase_url = \"http://x\"\nmodel = \"m\"\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.concurrency, 8);
        assert_eq!(
            cfg.data.bench_root.as_deref(),
            Some(dir.path().join("bench").as_path())
        );
        assert_eq!(
            cfg.cache_dir(),
            dir.path().join("mtbench-run").join("cache")
        );
        assert!(cfg.validate().is_err(), "missing bench root");
        fs::create_dir(dir.path().join("bench")).unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("concurency = 3").is_err());
        assert_eq!(RunConfig::default().datasets.alpha, 0.1);
    }
}
