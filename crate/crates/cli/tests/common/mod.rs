#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn mtbench(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_mtbench"))
        .args(args)
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn input_of(prompt: &str) -> String {
    prompt
        .split("### Input:\n")
        .nth(1)
        .and_then(|r| r.split("\n\n").next())
        .unwrap_or_default()
        .to_string()
}

/// Behavior by model name: `echo` copies the input, `upper` upper-cases it,
/// `fail` always answers 500. Hint prompts get "HINT-X".
async fn llm(State(calls): State<Arc<AtomicUsize>>, Json(body): Json<Value>) -> Response {
    calls.fetch_add(1, Ordering::SeqCst);
    let model = body["model"].as_str().unwrap_or_default();
    let prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
    if model == "fail" {
        return (StatusCode::INTERNAL_SERVER_ERROR, "down").into_response();
    }
    let text = if prompt.contains("Identify the domain") {
        "HINT-X\n".to_string()
    } else if model == "upper" {
        input_of(prompt).to_uppercase()
    } else {
        input_of(prompt)
    };
    Json(json!({"choices": [{"message": {"role": "assistant", "content": text}}]})).into_response()
}

async fn score(Json(body): Json<Value>) -> Json<Value> {
    let scores: Vec<f64> = body["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| if i["mt"] == i["ref"] { 0.9 } else { 0.5 })
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Json(json!({"scores": scores, "system_score": mean, "model_id": "Unbabel/wmt22-comet-da"}))
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok", "model_id": "Unbabel/wmt22-comet-da"}))
}

pub struct Mocks {
    pub rt: tokio::runtime::Runtime,
    pub llm_url: String,
    pub scorer_url: String,
    pub calls: Arc<AtomicUsize>,
}

impl Mocks {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

pub fn start_mocks() -> Mocks {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    let calls = Arc::new(AtomicUsize::new(0));
    let (llm_url, scorer_url) = rt.block_on(async {
        let app = Router::new()
            .route("/v1/chat/completions", post(llm))
            .with_state(calls.clone());
        let scorer = Router::new()
            .route("/score", post(score))
            .route("/health", get(health));
        (serve(app).await, serve(scorer).await)
    });
    Mocks {
        rt,
        llm_url,
        scorer_url,
        calls,
    }
}

async fn serve(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

pub const IN_DOMAIN: [&str; 4] = ["IT(OPUS)", "Law", "Medical", "Subtitles"];
pub const OOD: [&str; 2] = ["Koran", "Bible"];

/// A de-en tree with four in-domain and two out-of-domain test sets of
/// `n` segments each, a matching registry and training data.
pub fn small_bench(root: &Path, n: usize) {
    let bench = root.join("bench/de-en");
    fs::create_dir_all(&bench).unwrap();
    let mut reg = String::from("pair,id,count,in_domain\n");
    for (k, id) in IN_DOMAIN.iter().chain(&OOD).enumerate() {
        let mut body = String::new();
        for i in 0..n {
            body.push_str(&format!(
                "Satz {i} aus {id} Nummer {k}.\tSentence {i} from {id} number {k}.\n"
            ));
        }
        fs::write(bench.join(format!("{id}.tsv")), body).unwrap();
        reg.push_str(&format!("de-en,{id},{n},{}\n", k < 4));
    }
    fs::write(root.join("registry.csv"), reg).unwrap();
    let train = root.join("train/de-en");
    fs::create_dir_all(&train).unwrap();
    for id in IN_DOMAIN {
        let mut body = String::new();
        for i in 0..50 {
            body.push_str(&format!(
                "Trainingssatz {i} für {id}.\tTraining sentence {i} for {id}.\n"
            ));
        }
        fs::write(train.join(format!("{id}.tsv")), body).unwrap();
    }
}

pub fn write_config(root: &Path, mocks: &Mocks, scorer: bool, extra: &str) -> PathBuf {
    let mut text = format!(
        "work_dir = \"work\"\nseed = 13\nconcurrency = 4\n{extra}\n\
         [data]\nbench_root = \"bench\"\ntrain_root = \"train\"\nregistry = \"registry.csv\"\n\
         [endpoints.ft]\nbase_url = \"{u}\"\nmodel = \"echo\"\nretry_base_ms = 1\n\
         [endpoints.cot]\nbase_url = \"{u}\"\nmodel = \"upper\"\nretry_base_ms = 1\n\
         [endpoints.broken]\nbase_url = \"{u}\"\nmodel = \"fail\"\nmax_retries = 1\nretry_base_ms = 1\n",
        u = mocks.llm_url
    );
    if scorer {
        text.push_str(&format!(
            "[scorer]\nurl = \"{}\"\nbatch_size = 4\n",
            mocks.scorer_url
        ));
    }
    let path = root.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}
