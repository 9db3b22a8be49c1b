//! Client for the COMET scoring service (`POST /score`, `GET /health`).

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Reference-based scoring; every item needs `ref`.
    Reference,
    /// Reference-free quality estimation.
    Qe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreItem {
    pub src: String,
    pub mt: String,
    #[serde(rename = "ref", skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    items: &'a [ScoreItem],
    mode: ScoreMode,
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
    #[serde(default)]
    model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    /// Raw model-range scores aligned with the input items.
    pub scores: Vec<f64>,
    /// Unweighted mean; `None` for an empty input.
    pub system_score: Option<f64>,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct Health {
    pub status: String,
    #[serde(default)]
    pub model_id: String,
    #[serde(default)]
    pub modes: Vec<String>,
}

pub struct ScorerClient {
    base_url: String,
    batch_size: usize,
    client: reqwest::Client,
}

impl ScorerClient {
    pub fn new(
        base_url: &str,
        batch_size: usize,
        timeout_secs: f64,
    ) -> Result<Self, OrchestratorError> {
        if batch_size == 0 {
            return Err(OrchestratorError::Config(
                "scorer batch_size must be >= 1".into(),
            ));
        }
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(timeout_secs))
            .build()
            .map_err(|e| OrchestratorError::Config(e.to_string()))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            batch_size,
            client,
        })
    }

    pub async fn health(&self) -> Result<Health, OrchestratorError> {
        let url = format!("{}/health", self.base_url);
        let resp = self
            .client
            .get(&url)
            .send()
            .await
            .map_err(|e| OrchestratorError::ScorerUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(OrchestratorError::ScorerUnavailable(format!(
                "HTTP {}",
                resp.status()
            )));
        }
        resp.json()
            .await
            .map_err(|e| OrchestratorError::ScorerUnavailable(format!("bad health body: {e}")))
    }

    /// Scores `items` in batches of `batch_size`, preserving order.
    pub async fn score(
        &self,
        items: &[ScoreItem],
        mode: ScoreMode,
    ) -> Result<ScoreOutcome, OrchestratorError> {
        if mode == ScoreMode::Reference {
            if let Some(i) = items.iter().position(|it| it.reference.is_none()) {
                return Err(OrchestratorError::Config(format!(
                    "reference-mode scoring needs a reference for item {i}"
                )));
            }
        }
        let url = format!("{}/score", self.base_url);
        let n_batches = items.len().div_ceil(self.batch_size);
        let mut scores = Vec::with_capacity(items.len());
        let mut model_id = String::new();
        for (batch, chunk) in items.chunks(self.batch_size).enumerate() {
            let fail = |reason: String| OrchestratorError::BatchFailed {
                batch,
                n_batches,
                first_item: batch * self.batch_size,
                reason,
            };
            let resp = self
                .client
                .post(&url)
                .json(&ScoreRequest { items: chunk, mode })
                .send()
                .await
                .map_err(|e| fail(e.to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                let body = resp.text().await.unwrap_or_default();
                return Err(fail(format!(
                    "HTTP {status}: {}",
                    body.chars().take(200).collect::<String>()
                )));
            }
            let body: ScoreResponse = resp
                .json()
                .await
                .map_err(|e| fail(format!("bad body: {e}")))?;
            if body.scores.len() != chunk.len() {
                return Err(fail(format!(
                    "expected {} scores, got {}",
                    chunk.len(),
                    body.scores.len()
                )));
            }
            scores.extend(body.scores);
            model_id = body.model_id;
        }
        let system_score =
            (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
        Ok(ScoreOutcome {
            scores,
            system_score,
            model_id,
        })
    }
}
