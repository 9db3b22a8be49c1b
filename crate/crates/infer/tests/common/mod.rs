#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

pub struct Reply {
    pub status: u16,
    pub content: String,
    pub delay_ms: u64,
    /// Replaces the whole chat-completions body when set.
    pub raw_body: Option<String>,
}

impl Reply {
    pub fn ok(content: impl Into<String>) -> Self {
        Self {
            status: 200,
            content: content.into(),
            delay_ms: 0,
            raw_body: None,
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            content: String::new(),
            delay_ms: 0,
            raw_body: None,
        }
    }

    pub fn delayed(mut self, ms: u64) -> Self {
        self.delay_ms = ms;
        self
    }
}

type Behavior = dyn Fn(&str, usize) -> Reply + Send + Sync;

#[derive(Clone)]
struct LlmState {
    calls: Arc<AtomicUsize>,
    prompts: Arc<Mutex<Vec<String>>>,
    auth: Arc<Mutex<Vec<Option<String>>>>,
    behavior: Arc<Behavior>,
}

pub struct MockLlm {
    pub url: String,
    pub calls: Arc<AtomicUsize>,
    pub prompts: Arc<Mutex<Vec<String>>>,
    pub auth: Arc<Mutex<Vec<Option<String>>>>,
}

impl MockLlm {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

async fn llm_handler(
    State(st): State<LlmState>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> Response {
    let n = st.calls.fetch_add(1, Ordering::SeqCst);
    let prompt = body
        .pointer("/messages/0/content")
        .or_else(|| body.get("prompt"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    st.prompts.lock().unwrap().push(prompt.clone());
    st.auth.lock().unwrap().push(
        headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    );
    let reply = (st.behavior)(&prompt, n);
    if reply.delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(reply.delay_ms)).await;
    }
    let status = StatusCode::from_u16(reply.status).unwrap();
    let body = reply.raw_body.unwrap_or_else(|| {
        if body.get("prompt").is_some() {
            json!({"choices": [{"text": reply.content}]}).to_string()
        } else {
            json!({
                "choices": [{"index": 0, "message": {"role": "assistant", "content": reply.content}}],
                "usage": {"prompt_tokens": 1, "completion_tokens": 1},
            })
            .to_string()
        }
    });
    (status, [("content-type", "application/json")], body).into_response()
}

/// Chat/completions mock whose reply is computed from (prompt, call number).
pub async fn spawn_llm(behavior: impl Fn(&str, usize) -> Reply + Send + Sync + 'static) -> MockLlm {
    let st = LlmState {
        calls: Arc::new(AtomicUsize::new(0)),
        prompts: Arc::new(Mutex::new(Vec::new())),
        auth: Arc::new(Mutex::new(Vec::new())),
        behavior: Arc::new(behavior),
    };
    let app = Router::new()
        .route("/v1/chat/completions", post(llm_handler))
        .route("/v1/completions", post(llm_handler))
        .with_state(st.clone());
    let url = serve(app).await;
    MockLlm {
        url,
        calls: st.calls,
        prompts: st.prompts,
        auth: st.auth,
    }
}

/// Returns the text of the `### Input:` block of an Alpaca prompt, or the
/// line after the last `{lang}:` label for sentence prompts.
pub fn input_of(prompt: &str) -> String {
    if let Some(rest) = prompt.split("### Input:\n").nth(1) {
        return rest.split("\n\n").next().unwrap_or_default().to_string();
    }
    prompt
        .lines()
        .rev()
        .nth(1)
        .and_then(|l| l.split_once(": "))
        .map(|(_, s)| s.to_string())
        .unwrap_or_default()
}

pub async fn spawn_echo() -> MockLlm {
    spawn_llm(|p, _| Reply::ok(input_of(p))).await
}

type ScoreFn = dyn Fn(&Value) -> f64 + Send + Sync;

#[derive(Clone)]
struct ScorerState {
    calls: Arc<AtomicUsize>,
    fail_call: Option<usize>,
    score: Arc<ScoreFn>,
}

pub struct MockScorer {
    pub url: String,
    pub calls: Arc<AtomicUsize>,
}

impl MockScorer {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

async fn score_handler(State(st): State<ScorerState>, Json(body): Json<Value>) -> Response {
    let n = st.calls.fetch_add(1, Ordering::SeqCst);
    if st.fail_call == Some(n) {
        return (StatusCode::SERVICE_UNAVAILABLE, "model loading").into_response();
    }
    let items = body["items"].as_array().cloned().unwrap_or_default();
    if body["mode"] == "reference" && items.iter().any(|i| i.get("ref").is_none()) {
        return (StatusCode::BAD_REQUEST, "missing ref").into_response();
    }
    let scores: Vec<f64> = items.iter().map(|i| (st.score)(i)).collect();
    let mean = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
    Json(json!({"scores": scores, "system_score": mean, "model_id": "Unbabel/wmt22-comet-da"}))
        .into_response()
}

async fn health_handler() -> Json<Value> {
    Json(
        json!({"status": "ok", "model_id": "Unbabel/wmt22-comet-da", "modes": ["reference", "qe"]}),
    )
}

/// Scoring-service mock; `fail_call` makes that (0-based) call return 503.
pub async fn spawn_scorer(
    fail_call: Option<usize>,
    score: impl Fn(&Value) -> f64 + Send + Sync + 'static,
) -> MockScorer {
    let st = ScorerState {
        calls: Arc::new(AtomicUsize::new(0)),
        fail_call,
        score: Arc::new(score),
    };
    let app = Router::new()
        .route("/score", post(score_handler))
        .route("/health", get(health_handler))
        .with_state(st.clone());
    MockScorer {
        url: serve(app).await,
        calls: st.calls,
    }
}

async fn serve(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    format!("http://{addr}")
}
