//! Bounded-concurrency batch execution against OpenAI-compatible endpoints.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tracing::{debug, warn};

use crate::cache::{CacheEntry, ResponseCache};
use crate::config::{ApiStyle, EndpointConfig};
use crate::OrchestratorError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub request_id: usize,
    pub prompt: String,
    pub cache_key: String,
}

/// Hex SHA-256 over the canonical request tuple.
pub fn cache_key(cfg: &EndpointConfig, prompt: &str) -> String {
    let canonical = json!({
        "base_url": cfg.base_url.trim_end_matches('/'),
        "model": cfg.model,
        "api_style": cfg.api_style,
        "decode": cfg.decode,
        "prompt": prompt,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

impl InferenceRequest {
    pub fn new(request_id: usize, prompt: String, cfg: &EndpointConfig) -> Self {
        let cache_key = cache_key(cfg, &prompt);
        Self {
            request_id,
            prompt,
            cache_key,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub request_id: usize,
    /// Extracted completion text; `None` when the request failed.
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub from_cache: bool,
    pub latency_ms: u64,
    pub attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usage: Option<Value>,
}

impl Completion {
    pub fn is_ok(&self) -> bool {
        self.text.is_some()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExtractError {
    #[error("response is not JSON: {0}")]
    NotJson(String),
    #[error("response has no choices")]
    NoChoices,
    #[error("first choice has no text content")]
    NoContent,
}

/// First choice's content (`message.content` for chat, `text` for completions),
/// trailing whitespace trimmed.
pub fn extract_text(raw: &[u8], style: ApiStyle) -> Result<String, ExtractError> {
    let v: Value = serde_json::from_slice(raw).map_err(|e| ExtractError::NotJson(e.to_string()))?;
    let first = v
        .get("choices")
        .and_then(Value::as_array)
        .and_then(|c| c.first())
        .ok_or(ExtractError::NoChoices)?;
    let content = match style {
        ApiStyle::Chat => first.pointer("/message/content"),
        ApiStyle::Completion => first.get("text"),
    };
    content
        .and_then(Value::as_str)
        .map(|s| s.trim_end().to_string())
        .ok_or(ExtractError::NoContent)
}

fn request_body(cfg: &EndpointConfig, prompt: &str) -> Value {
    let d = &cfg.decode;
    let mut body = match cfg.api_style {
        ApiStyle::Chat => json!({
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
        }),
        ApiStyle::Completion => json!({"model": cfg.model, "prompt": prompt}),
    };
    body["temperature"] = json!(d.temperature);
    body["top_p"] = json!(d.top_p);
    body["max_tokens"] = json!(d.max_tokens);
    if let Some(stop) = &d.stop {
        body["stop"] = json!(stop);
    }
    body
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(String),
}

/// Runs prompts against one endpoint; cheap to share by reference across a run.
pub struct Orchestrator {
    cfg: EndpointConfig,
    client: reqwest::Client,
    cache: Option<ResponseCache>,
    concurrency: usize,
    api_key: Option<String>,
    network_calls: AtomicU64,
}

impl Orchestrator {
    pub fn new(
        cfg: EndpointConfig,
        cache: Option<ResponseCache>,
        concurrency: usize,
    ) -> Result<Self, OrchestratorError> {
        cfg.validate()?;
        if concurrency == 0 {
            return Err(OrchestratorError::Config("concurrency must be >= 1".into()));
        }
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                OrchestratorError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| OrchestratorError::Config(e.to_string()))?;
        Ok(Self {
            cfg,
            client,
            cache,
            concurrency,
            api_key,
            network_calls: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    pub fn concurrency(&self) -> usize {
        self.concurrency
    }

    /// HTTP attempts made so far (retries included).
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::Relaxed)
    }

    pub fn request(&self, request_id: usize, prompt: String) -> InferenceRequest {
        InferenceRequest::new(request_id, prompt, &self.cfg)
    }

    /// One completion per request, sorted by `request_id`. Requests sharing a
    /// cache key are sent once; failures are reported per request.
    pub async fn execute_batch(&self, requests: Vec<InferenceRequest>) -> Vec<Completion> {
        let mut first_of: HashMap<&str, usize> = HashMap::new();
        let mut unique: Vec<&InferenceRequest> = Vec::new();
        for r in &requests {
            first_of.entry(r.cache_key.as_str()).or_insert_with(|| {
                unique.push(r);
                r.request_id
            });
        }
        let done: Vec<Completion> = stream::iter(unique.iter().map(|r| self.execute_one(r)))
            .buffer_unordered(self.concurrency)
            .collect()
            .await;
        let by_id: HashMap<usize, Completion> =
            done.into_iter().map(|c| (c.request_id, c)).collect();
        let mut out: Vec<Completion> = requests
            .iter()
            .map(|r| {
                let leader = first_of[r.cache_key.as_str()];
                let mut c = by_id[&leader].clone();
                if leader != r.request_id {
                    // Served from the leader's response without another call.
                    c.from_cache = c.from_cache || c.is_ok();
                    c.attempts = 0;
                    c.latency_ms = 0;
                }
                c.request_id = r.request_id;
                c
            })
            .collect();
        out.sort_by_key(|c| c.request_id);
        out
    }

    async fn execute_one(&self, req: &InferenceRequest) -> Completion {
        let start = Instant::now();
        if let Some(entry) = self.cache.as_ref().and_then(|c| c.get(&req.cache_key)) {
            return Completion {
                request_id: req.request_id,
                text: Some(entry.text),
                raw: Some(entry.raw),
                error: None,
                from_cache: true,
                latency_ms: 0,
                attempts: 0,
                usage: None,
            };
        }
        let body = request_body(&self.cfg, &req.prompt);
        let mut attempts = 0u32;
        let mut rng =
            ChaCha8Rng::seed_from_u64(u64::from_str_radix(&req.cache_key[..16], 16).unwrap_or(0));
        let outcome = loop {
            attempts += 1;
            match self.attempt(&body).await {
                Attempt::Done(raw) => break Ok(raw),
                Attempt::Fail(e) => break Err(e),
                Attempt::Retry(e) if attempts > self.cfg.max_retries => break Err(e),
                Attempt::Retry(e) => {
                    let base = self
                        .cfg
                        .retry_base_ms
                        .saturating_mul(1 << (attempts - 1).min(16));
                    let jitter = if base == 0 { 0 } else { rng.next_u64() % base };
                    warn!(request = req.request_id, attempt = attempts, error = %e, "retrying");
                    tokio::time::sleep(Duration::from_millis(base + jitter)).await;
                }
            }
        };
        let latency_ms = start.elapsed().as_millis() as u64;
        let mut c = Completion {
            request_id: req.request_id,
            text: None,
            raw: None,
            error: None,
            from_cache: false,
            latency_ms,
            attempts,
            usage: None,
        };
        match outcome.and_then(|raw| {
            extract_text(raw.as_bytes(), self.cfg.api_style)
                .map(|t| (t, raw))
                .map_err(|e| e.to_string())
        }) {
            Ok((text, raw)) => {
                c.usage = serde_json::from_str::<Value>(&raw)
                    .ok()
                    .and_then(|v| v.get("usage").cloned());
                if let Some(cache) = &self.cache {
                    let entry = CacheEntry {
                        key: req.cache_key.clone(),
                        model: self.cfg.model.clone(),
                        text: text.clone(),
                        raw: raw.clone(),
                    };
                    if let Err(e) = cache.put(&entry) {
                        warn!(error = %e, "cache write failed");
                    }
                }
                c.text = Some(text);
                c.raw = Some(raw);
            }
            Err(e) => c.error = Some(e),
        }
        c
    }

    async fn attempt(&self, body: &Value) -> Attempt {
        self.network_calls.fetch_add(1, Ordering::Relaxed);
        let mut rb = self.client.post(self.cfg.url()).json(body);
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = match rb.send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(format!("timeout: {e}")),
            Err(e) => return Attempt::Fail(format!("request failed: {e}")),
        };
        let status = resp.status();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry(format!("timeout reading body: {e}"))
            }
            Err(e) => return Attempt::Fail(format!("reading body: {e}")),
        };
        debug!(%status, "response");
        if status.is_success() {
            Attempt::Done(text)
        } else if status.as_u16() == 429 || status.is_server_error() {
            Attempt::Retry(format!("HTTP {status}"))
        } else {
            Attempt::Fail(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            ))
        }
    }
}

/// Convenience wrapper for a one-off batch.
pub async fn execute_batch(
    requests: Vec<InferenceRequest>,
    cfg: &EndpointConfig,
    concurrency: usize,
    cache: Option<ResponseCache>,
) -> Result<Vec<Completion>, OrchestratorError> {
    let orch = Orchestrator::new(cfg.clone(), cache, concurrency)?;
    Ok(orch.execute_batch(requests).await)
}
