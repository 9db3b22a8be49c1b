//! LLM endpoint orchestration, the scoring-service client and the inference pipelines.

pub mod cache;
pub mod config;
pub mod orchestrator;
pub mod pipelines;
pub mod scorer;

pub use cache::ResponseCache;
pub use config::{ApiStyle, DecodeParams, EndpointConfig};
pub use orchestrator::{execute_batch, extract_text, Completion, InferenceRequest, Orchestrator};
pub use pipelines::{PipelineMode, TranslationRecord};
pub use scorer::{ScoreItem, ScoreMode, ScoreOutcome, ScorerClient};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("scoring batch {batch} of {n_batches} (items from {first_item}) failed: {reason}")]
    BatchFailed {
        batch: usize,
        n_batches: usize,
        first_item: usize,
        reason: String,
    },
    #[error(transparent)]
    Prompt(#[from] mtbench_core::prompting::PromptError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
