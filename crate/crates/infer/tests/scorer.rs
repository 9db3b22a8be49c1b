mod common;

use common::spawn_scorer;
use mtbench_infer::{OrchestratorError, ScoreItem, ScoreMode, ScorerClient};

fn items(n: usize) -> Vec<ScoreItem> {
    (0..n)
        .map(|i| ScoreItem {
            src: format!("s{i}"),
            mt: "x".repeat(i + 1),
            reference: Some(format!("r{i}")),
        })
        .collect()
}

#[tokio::test]
async fn constant_scores_average_to_the_constant() {
    let mock = spawn_scorer(None, |_| 0.5).await;
    let client = ScorerClient::new(&mock.url, 16, 5.0).unwrap();
    let out = client.score(&items(7), ScoreMode::Reference).await.unwrap();
    assert_eq!(out.scores, vec![0.5; 7]);
    assert_eq!(out.system_score, Some(0.5));
    assert!(out.model_id.contains("wmt22-comet-da"));
}

#[tokio::test]
async fn batches_of_two_over_five_records_make_three_calls() {
    let mock = spawn_scorer(None, |i| i["mt"].as_str().unwrap().len() as f64).await;
    let client = ScorerClient::new(&mock.url, 2, 5.0).unwrap();
    let out = client.score(&items(5), ScoreMode::Qe).await.unwrap();
    assert_eq!(mock.calls(), 3);
    assert_eq!(out.scores, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    assert!((out.system_score.unwrap() - 3.0).abs() < 1e-12);
}

#[tokio::test]
async fn empty_input_has_no_system_score() {
    let mock = spawn_scorer(None, |_| 0.5).await;
    let client = ScorerClient::new(&mock.url, 2, 5.0).unwrap();
    let out = client.score(&[], ScoreMode::Reference).await.unwrap();
    assert!(out.scores.is_empty());
    assert_eq!(out.system_score, None);
    assert_eq!(mock.calls(), 0);
}

#[tokio::test]
async fn failed_batch_is_identified() {
    let mock = spawn_scorer(Some(1), |_| 0.1).await;
    let client = ScorerClient::new(&mock.url, 2, 5.0).unwrap();
    let err = client.score(&items(5), ScoreMode::Qe).await.unwrap_err();
    match err {
        OrchestratorError::BatchFailed {
            batch,
            n_batches,
            first_item,
            ..
        } => assert_eq!((batch, n_batches, first_item), (1, 3, 2)),
        other => panic!("unexpected {other}"),
    }
}

#[tokio::test]
async fn reference_mode_requires_references() {
    let mock = spawn_scorer(None, |_| 0.5).await;
    let client = ScorerClient::new(&mock.url, 2, 5.0).unwrap();
    let mut it = items(3);
    it[1].reference = None;
    assert!(client.score(&it, ScoreMode::Reference).await.is_err());
    assert_eq!(mock.calls(), 0);
    assert!(client.score(&it, ScoreMode::Qe).await.is_ok());
}

#[tokio::test]
async fn health_reports_model_and_unavailable_service_errors() {
    let mock = spawn_scorer(None, |_| 0.5).await;
    let h = ScorerClient::new(&mock.url, 1, 5.0)
        .unwrap()
        .health()
        .await
        .unwrap();
    assert_eq!(h.status, "ok");
    assert!(h.model_id.contains("wmt22-comet-da"));
    let dead = ScorerClient::new("http://127.0.0.1:9", 1, 1.0).unwrap();
    assert!(matches!(
        dead.health().await,
        Err(OrchestratorError::ScorerUnavailable(_))
    ));
    assert!(ScorerClient::new(&mock.url, 0, 1.0).is_err());
}
