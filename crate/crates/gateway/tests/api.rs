use std::sync::OnceLock;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use latentforge::attack::ExperimentConfig;
use latentforge::recognition;
use latentforge::workspace::{self, PipelineConfig, WorkspaceLayout};
use latentforge_gateway::server::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn workspace_root() -> &'static std::path::Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        workspace::build_all(&WorkspaceLayout::new(dir.path()), &PipelineConfig::default()).unwrap();
        dir
    })
    .path()
}

fn app() -> Router {
    router(AppState::load(WorkspaceLayout::new(workspace_root()), ExperimentConfig::default()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[tokio::test]
async fn info_lists_64_component_ranges() {
    let app = app();
    let (status, info) = call(&app, "GET", "/api/info", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(info["component_ranges"].as_array().unwrap().len(), 64);
    assert!(info["component_ranges"][0].as_array().unwrap().len() == 2);
    assert_eq!(info["eigenvalues"].as_array().unwrap().len(), 64);
    assert_eq!(info["labels"], json!(["id00", "id01"]));
    assert_eq!(info["samples"].as_array().unwrap().len(), 200);
}

#[tokio::test]
async fn explore_rejects_wrong_arity() {
    let app = app();
    let (status, body) = call(&app, "POST", "/api/explore", Some(json!({ "coords": vec![0.0; 63] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "bad_request");
    assert!(body["message"].as_str().unwrap().contains("64"));

    let (status, _) = call(&app, "POST", "/api/explore", Some(json!({ "nope": 1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn encoded_gallery_image_explores_without_dodging() {
    let app = app();
    let (status, sample) = call(&app, "GET", "/api/samples/id01-007", None).await;
    assert_eq!(status, StatusCode::OK);

    let gallery = WorkspaceLayout::new(workspace_root()).load_gallery().unwrap();
    let entry = gallery.iter().find(|e| e.entry_id == "id01-007").unwrap();
    let (status, enc) =
        call(&app, "POST", "/api/encode", Some(json!({ "image": recognition::encode_image_b64(&entry.image) }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(enc["nearest_label"], "id01");
    assert_eq!(sample["label"], "id01");

    let (status, out) = call(&app, "POST", "/api/explore", Some(json!({ "coords": enc["coords"] }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["true_label"], "id01");
    assert_eq!(out["outcome"]["dodging"], false);
    assert_eq!(out["results"].as_array().unwrap().len(), 200);
    let img = recognition::decode_image_b64(out["image"].as_str().unwrap()).unwrap();
    assert_eq!((img.width(), img.height()), (64, 64));

    // interactive budget: 250 ms per explore call on the default workspace
    let mut times = Vec::new();
    for _ in 0..5 {
        let start = std::time::Instant::now();
        let (status, _) = call(&app, "POST", "/api/explore", Some(json!({ "coords": enc["coords"] }))).await;
        assert_eq!(status, StatusCode::OK);
        times.push(start.elapsed());
    }
    times.sort();
    assert!(times[2] <= Duration::from_millis(250), "median explore latency {:?}", times[2]);
}

#[tokio::test]
async fn compare_speaks_the_wire_format() {
    let app = app();
    let gallery = WorkspaceLayout::new(workspace_root()).load_gallery().unwrap();
    let probe = recognition::encode_image_b64(&gallery[0].image);
    let (status, body) = call(&app, "POST", "/api/compare", Some(json!({ "probe": probe }))).await;
    assert_eq!(status, StatusCode::OK);
    let results = body["results"].as_array().unwrap();
    assert_eq!(results.len(), gallery.len());
    assert_eq!(results[0]["entry_id"], gallery[0].entry_id);

    let (status, body) = call(&app, "POST", "/api/compare", Some(json!({ "probe": "not base64!" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "bad_request");
}

#[tokio::test]
async fn sweep_runs_in_background_and_caps_grid() {
    let app = app();
    let (_, info) = call(&app, "GET", "/api/info", None).await;
    let lo = info["component_ranges"][0][0].clone();
    let hi = info["component_ranges"][0][1].clone();
    let request = json!({
        "indices": [0], "ranges": [[lo, hi]], "steps": 5,
        "base_coords": vec![0.0; 64], "true_label": "id00",
    });
    let (status, submitted) = call(&app, "POST", "/api/sweep", Some(request)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let run_id = submitted["run_id"].as_str().unwrap().to_string();

    let mut report = Value::Null;
    for _ in 0..200 {
        let (status, body) = call(&app, "GET", &format!("/api/sweep/{run_id}"), None).await;
        if status == StatusCode::OK {
            report = body;
            break;
        }
        assert_eq!(status, StatusCode::ACCEPTED);
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    assert_eq!(report["run_id"], run_id.as_str());
    assert_eq!(report["records"].as_array().unwrap().len(), 5);

    let huge = json!({
        "indices": [0, 1, 2, 3, 4], "ranges": vec![[-1.0, 1.0]; 5], "steps": 7, "base_coords": vec![0.0; 64],
    });
    let (status, body) = call(&app, "POST", "/api/sweep", Some(huge)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "grid_too_large");

    let (status, _) = call(&app, "GET", "/api/sweep/sweep-unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bookmarks_and_baselines() {
    let dir = tempfile::tempdir().unwrap();
    // bookmarks need no models; use a bare workspace
    let bare = router(AppState::load(WorkspaceLayout::new(dir.path()), ExperimentConfig::default()));
    let (status, saved) =
        call(&bare, "POST", "/api/bookmarks", Some(json!({ "coords": vec![0.25; 64], "note": "keep" }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(saved["note"], "keep");

    let reloaded = router(AppState::load(WorkspaceLayout::new(dir.path()), ExperimentConfig::default()));
    let (status, list) = call(&reloaded, "GET", "/api/bookmarks", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["bookmark_id"], saved["bookmark_id"]);

    let (status, body) = call(&bare, "GET", "/api/baselines", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"], "unavailable");

    let (status, baselines) = call(&app(), "GET", "/api/baselines", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(baselines["similarity_matrix"].as_array().unwrap().len(), 4);
}
