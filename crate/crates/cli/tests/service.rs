use std::process::Command;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use blendpal::names::NameModel;
use blendpal::objective::{total_score, ObjectiveConfig, Solution};
use blendpal::scene::{scene_from_histograms, HistogramSpec};
use blendpal_cli::service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn three_class() -> Value {
    json!({
        "class_labels": ["A", "B", "C"],
        "bin_edges": [0, 1, 2, 3, 4, 5],
        "heights": [[3, 3, 2, 0, 0], [0, 2, 4, 3, 0], [0, 0, 1, 2, 3]],
        "background": "#ffffff"
    })
}

fn state(ttl: Duration) -> Arc<AppState> {
    AppState::new(NameModel::prototype(), ServiceConfig { workers: 2, ttl })
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn wait_done(state: &Arc<AppState>, id: &str) -> Value {
    for _ in 0..600 {
        let (status, job) = call(state, "GET", &format!("/v1/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if job["status"] == "done" || job["status"] == "failed" {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("job {id} did not finish");
}

#[tokio::test]
async fn healthz_reports_the_model() {
    let st = state(Duration::from_secs(60));
    let (status, body) = call(&st, "GET", "/v1/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["name_model"]["bins"], NameModel::prototype().bin_count());
}

#[tokio::test]
async fn optimize_job_matches_the_cli_run() {
    let st = state(Duration::from_secs(60));
    let req = json!({
        "scene": {"histogram": three_class()},
        "objective": {"weights": [1.0, 1.0, 0.5]},
        "schedule": {"seed": 9}
    });
    let (status, accepted) = call(&st, "POST", "/v1/optimize", Some(req)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = accepted["id"].as_str().unwrap().to_string();
    let job = wait_done(&st, &id).await;
    assert_eq!(job["status"], "done", "{job}");
    assert_eq!(job["seed"], 9);
    assert_eq!(job["result"]["trace"]["iterations"], 1833);
    let service_doc = &job["result"]["document"];
    assert_eq!(service_doc["breakdown"]["constraints_ok"], true);

    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("three.json");
    std::fs::write(&scene, three_class().to_string()).unwrap();
    let out = dir.path().join("sol.json");
    let o = Command::new(env!("CARGO_BIN_EXE_blendpal"))
        .args(["optimize", "--scene", scene.to_str().unwrap(), "--weights", "1,1,0.5", "--seed", "9"])
        .args(["--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cli_doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(&cli_doc, service_doc);
}

#[tokio::test]
async fn score_matches_the_library() {
    let st = state(Duration::from_secs(60));
    let sol = json!({"palette": ["#1f77b4", "#ff7f0e", "#2ca02c"], "opacities": [0.5, 0.6, 0.4], "order": [2, 0, 1]});
    let (status, body) = call(&st, "POST", "/v1/score", Some(json!({"scene": {"histogram": three_class()}, "solution": sol.clone()}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");

    let spec: HistogramSpec = serde_json::from_value(three_class()).unwrap();
    let scene = scene_from_histograms(&spec).unwrap();
    let sol: Solution = serde_json::from_value(sol).unwrap();
    let direct = total_score(&scene, &NameModel::prototype(), &sol, &ObjectiveConfig::default()).unwrap();
    assert_eq!(body, serde_json::to_value(direct).unwrap());

    // A prebuilt structure scores the same.
    let (_, again) = call(
        &st,
        "POST",
        "/v1/score",
        Some(json!({"scene": {"structure": serde_json::to_value(&scene).unwrap()}, "solution": serde_json::to_value(&sol).unwrap()})),
    )
    .await;
    assert_eq!(again, body);
}

#[tokio::test]
async fn stimuli_endpoint_returns_a_histogram_spec() {
    let st = state(Duration::from_secs(60));
    let (status, body) = call(&st, "POST", "/v1/stimuli", Some(json!({"classes": 3, "smoothness": "unsmooth", "seed": 4}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let spec: HistogramSpec = serde_json::from_value(body["spec"].clone()).unwrap();
    assert_eq!(spec.m(), 3);
    assert!(body["kl"].as_array().unwrap().iter().all(|k| (0.07..=0.1).contains(&k.as_f64().unwrap())));
}

#[tokio::test]
async fn invalid_requests_name_the_field() {
    let st = state(Duration::from_secs(60));
    let cases = [
        (json!({"scene": {"histogram": three_class()}, "objective": {"weights": [1, 1]}}), "objective.weights"),
        (json!({"scene": {"histogram": three_class()}, "objective": {"jnd_threshold": -1}}), "objective.jnd_threshold"),
        (json!({"scene": {"histogram": three_class()}, "schedule": {"gamma": 1.5}}), "schedule.gamma"),
        (json!({"scene": {"histogram": three_class()}, "bogus": 1}), "."),
        (
            json!({"scene": {"histogram": {"class_labels": ["a"], "bin_edges": [0, 1], "heights": [[-2]]}}}),
            "scene.histogram.heights",
        ),
        (
            json!({"scene": {"histogram": three_class()}, "search": {"fixed_palette": ["#ff0000"]}}),
            "search",
        ),
    ];
    for (body, field) in cases {
        let (status, err) = call(&st, "POST", "/v1/optimize", Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(err["code"].is_string() && err["message"].is_string(), "{err}");
        if field != "." {
            let got = err["field"].as_str().unwrap_or_default();
            assert!(got.starts_with(field), "{body}: field {got:?}, expected {field:?}");
        }
    }
    let (status, err) = call(&st, "POST", "/v1/score", Some(json!({"scene": {"histogram": three_class()}, "solution": {"palette": ["#000000"], "opacities": [0.5], "order": [0]}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], "solution");
    let (status, _) = call(&st, "POST", "/v1/optimize", Some(json!("not an object"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn infeasible_jobs_fail_with_diagnostics() {
    let st = state(Duration::from_secs(60));
    let req = json!({"scene": {"histogram": three_class()}, "objective": {"bg_contrast": 95.0}});
    let (status, accepted) = call(&st, "POST", "/v1/optimize", Some(req)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = wait_done(&st, accepted["id"].as_str().unwrap()).await;
    assert_eq!(job["status"], "failed");
    assert_eq!(job["error"]["code"], "infeasible_start");
    assert!(!job["error"]["violations"].as_array().unwrap().is_empty());
    assert!(job.get("result").is_none());
}

#[tokio::test]
async fn unknown_and_expired_jobs_are_404() {
    let st = state(Duration::from_millis(50));
    let (status, err) = call(&st, "GET", "/v1/jobs/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "job_not_found");

    let req = json!({"scene": {"histogram": three_class()}, "schedule": {"t_start": 1.0, "t_end": 0.5}});
    let (_, accepted) = call(&st, "POST", "/v1/optimize", Some(req)).await;
    let id = accepted["id"].as_str().unwrap().to_string();
    wait_done(&st, &id).await;
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (status, _) = call(&st, "GET", &format!("/v1/jobs/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(&st, "GET", "/v2/anything", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_jobs_are_independent() {
    let st = state(Duration::from_secs(60));
    let mut ids = Vec::new();
    for seed in 0..4 {
        let req = json!({"scene": {"histogram": three_class()}, "schedule": {"seed": seed, "t_start": 10.0}});
        let (status, accepted) = call(&st, "POST", "/v1/optimize", Some(req)).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        ids.push(accepted["id"].as_str().unwrap().to_string());
    }
    let mut docs = Vec::new();
    for id in &ids {
        let job = wait_done(&st, id).await;
        assert_eq!(job["status"], "done");
        docs.push(job["result"]["document"].clone());
    }
    // Rerunning one seed alone gives the same document.
    let req = json!({"scene": {"histogram": three_class()}, "schedule": {"seed": 2, "t_start": 10.0}});
    let (_, accepted) = call(&st, "POST", "/v1/optimize", Some(req)).await;
    let job = wait_done(&st, accepted["id"].as_str().unwrap()).await;
    assert_eq!(job["result"]["document"], docs[2]);
}
