//! HTTP/JSON service over a built workspace.
//!
//! Models and gallery are read-only; only bookmarks and sweep reports are
//! written. Sweeps run one at a time, in submission order, on a background
//! worker.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use latentforge::attack::{self, AttackOutcome, CoordsSource, ExperimentConfig, Strategy};
use latentforge::autoencoder::LATENT_DIM;
use latentforge::imaging::{self, Raster};
use latentforge::latent_pca::PcaCoords;
use latentforge::manipulate::{self, ManipulateError, SweepSpec};
use latentforge::recognition::{self, CompareRequest, MatchResult, RecognitionClient};
use latentforge::workspace::{self, Artifacts, NewBookmark, WorkspaceError, WorkspaceLayout};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;

/// Error body: `{"error": code, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        match e {
            WorkspaceError::Missing { .. } => Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            WorkspaceError::Invalid(_) => Self::bad_request(e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_json<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepStatus {
    Queued,
    Running,
    Done,
    Failed { message: String },
}

struct SweepJob {
    run_id: String,
    strategy: Strategy,
}

pub struct AppState {
    layout: WorkspaceLayout,
    artifacts: Option<Arc<Artifacts>>,
    /// Why `artifacts` is missing, for 503 bodies.
    unavailable: Option<String>,
    experiment: ExperimentConfig,
    bookmarks: tokio::sync::Mutex<()>,
    sweeps: Arc<Mutex<HashMap<String, SweepStatus>>>,
    sweep_tx: Option<mpsc::UnboundedSender<SweepJob>>,
}

impl AppState {
    /// Loads the workspace. Missing artifacts do not fail startup; the
    /// endpoints that need them answer 503 instead.
    pub fn load(layout: WorkspaceLayout, experiment: ExperimentConfig) -> Self {
        match Artifacts::load(&layout) {
            Ok(a) => Self::with_artifacts(layout, Some(Arc::new(a)), None, experiment),
            Err(e) => Self::with_artifacts(layout, None, Some(e.to_string()), experiment),
        }
    }

    fn with_artifacts(
        layout: WorkspaceLayout,
        artifacts: Option<Arc<Artifacts>>,
        unavailable: Option<String>,
        experiment: ExperimentConfig,
    ) -> Self {
        Self {
            layout,
            artifacts,
            unavailable,
            experiment,
            bookmarks: tokio::sync::Mutex::new(()),
            sweeps: Arc::new(Mutex::new(HashMap::new())),
            sweep_tx: None,
        }
    }

    pub fn is_ready(&self) -> bool {
        self.artifacts.is_some()
    }

    pub fn unavailable_reason(&self) -> Option<&str> {
        self.unavailable.as_deref()
    }

    fn artifacts(&self) -> ApiResult<&Arc<Artifacts>> {
        self.artifacts.as_ref().ok_or_else(|| {
            ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "unavailable",
                self.unavailable.clone().unwrap_or_else(|| "workspace artifacts not loaded".into()),
            )
        })
    }
}

/// Builds the router and starts the sweep worker. Must run inside a tokio runtime.
pub fn router(mut state: AppState) -> Router {
    if let Some(artifacts) = state.artifacts.clone() {
        let (tx, rx) = mpsc::unbounded_channel();
        state.sweep_tx = Some(tx);
        tokio::spawn(sweep_worker(rx, state.layout.clone(), artifacts, state.experiment.clone(), state.sweeps.clone()));
    }
    Router::new()
        .route("/api/info", get(info))
        .route("/api/samples/{sample_id}", get(sample))
        .route("/api/explore", post(explore))
        .route("/api/encode", post(encode))
        .route("/api/compare", post(compare))
        .route("/api/sweep", post(submit_sweep))
        .route("/api/sweep/{run_id}", get(sweep_result))
        .route("/api/bookmarks", get(list_bookmarks).post(add_bookmark))
        .route("/api/baselines", get(baselines))
        .route("/api/reports", get(reports))
        .with_state(Arc::new(state))
}

async fn sweep_worker(
    mut rx: mpsc::UnboundedReceiver<SweepJob>,
    layout: WorkspaceLayout,
    artifacts: Arc<Artifacts>,
    experiment: ExperimentConfig,
    sweeps: Arc<Mutex<HashMap<String, SweepStatus>>>,
) {
    while let Some(job) = rx.recv().await {
        sweeps.lock().unwrap().insert(job.run_id.clone(), SweepStatus::Running);
        let (layout, artifacts) = (layout.clone(), artifacts.clone());
        let cfg = ExperimentConfig { run_id: Some(job.run_id.clone()), ..experiment.clone() };
        let result =
            tokio::task::spawn_blocking(move || workspace::run_and_save(&layout, &artifacts, &job.strategy, &cfg))
                .await;
        let status = match result {
            Ok(Ok(_)) => SweepStatus::Done,
            Ok(Err(e)) => SweepStatus::Failed { message: e.to_string() },
            Err(e) => SweepStatus::Failed { message: e.to_string() },
        };
        if let SweepStatus::Failed { message } = &status {
            log::warn!("sweep {} failed: {message}", job.run_id);
        }
        sweeps.lock().unwrap().insert(job.run_id, status);
    }
}

#[derive(Debug, Serialize)]
struct SampleInfo {
    sample_id: String,
    label: String,
}

async fn info(State(state): State<Arc<AppState>>) -> ApiResult<Json<serde_json::Value>> {
    let a = state.artifacts()?;
    let ranges = a.component_ranges()?;
    let samples: Vec<SampleInfo> =
        a.samples.iter().map(|s| SampleInfo { sample_id: s.sample_id.clone(), label: s.label.clone() }).collect();
    Ok(Json(json!({
        "image_width": a.autoencoder.input_width(),
        "image_height": a.autoencoder.input_height(),
        "latent_dim": LATENT_DIM,
        "labels": a.labels(),
        "component_ranges": ranges,
        "eigenvalues": a.pca.eigenvalues,
        "separation": a.separation,
        "samples": samples,
        "threshold": state.experiment.threshold,
    })))
}

async fn sample(
    State(state): State<Arc<AppState>>,
    Path(sample_id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let a = state.artifacts()?;
    let dataset = state.layout.load_dataset()?;
    let s = dataset
        .iter()
        .find(|s| s.sample_id == sample_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown sample {sample_id}")))?;
    let coords = a.samples.iter().find(|c| c.sample_id == sample_id).map(|c| c.coords.clone());
    Ok(Json(json!({
        "sample_id": s.sample_id,
        "label": s.label,
        "image": recognition::encode_image_b64(&s.image),
        "coords": coords,
    })))
}

fn coords_from(values: Vec<f64>) -> ApiResult<PcaCoords> {
    PcaCoords::new(values).map_err(|e| ApiError::bad_request(e.to_string()))
}

/// Label whose class mean is closest to `coords`.
fn nearest_label(a: &Artifacts, coords: &PcaCoords) -> ApiResult<String> {
    let means = manipulate::class_mean_coords(&attack::coords_by_label(&a.samples))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let dist = |m: &PcaCoords| m.values().iter().zip(coords.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    means
        .iter()
        .min_by(|x, y| dist(x.1).total_cmp(&dist(y.1)))
        .map(|(l, _)| l.clone())
        .ok_or_else(|| ApiError::internal("no labels"))
}

fn check_label(a: &Artifacts, label: &str) -> ApiResult<()> {
    if a.labels().iter().any(|l| l == label) {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("unknown label {label}")))
    }
}

#[derive(Debug, Deserialize)]
struct ExploreRequest {
    coords: Vec<f64>,
    /// Identity the candidate is judged against; defaults to the nearest class mean.
    #[serde(default)]
    true_label: Option<String>,
}

#[derive(Debug, Serialize)]
struct ExploreResponse {
    image: String,
    true_label: String,
    results: Vec<MatchResult>,
    outcome: AttackOutcome,
}

async fn explore(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<ExploreResponse>> {
    let a = state.artifacts()?.clone();
    let req: ExploreRequest = parse_json(&body)?;
    let coords = coords_from(req.coords)?;
    let true_label = match req.true_label {
        Some(l) => {
            check_label(&a, &l)?;
            l
        }
        None => nearest_label(&a, &coords)?,
    };
    let cfg = state.experiment.clone();
    let label = true_label.clone();
    let (image, outcome, results) = tokio::task::spawn_blocking(move || a.explore(&coords, &label, &cfg))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "evaluation_failed", e))?;
    Ok(Json(ExploreResponse { image: recognition::encode_image_b64(&image), true_label, results, outcome }))
}

#[derive(Debug, Deserialize)]
struct EncodeRequest {
    image: String,
}

async fn encode(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let a = state.artifacts()?;
    let req: EncodeRequest = parse_json(&body)?;
    let img = recognition::decode_image_b64(&req.image).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let side = a.autoencoder.input_width();
    let (img, resized) = if img.width() == side && img.height() == side {
        (img, false)
    } else {
        let raster = Raster::from(&img);
        let pre = imaging::preprocess(&raster, side).map_err(|e| ApiError::bad_request(e.to_string()))?;
        (pre.image, true)
    };
    let z = a.autoencoder.encode(&img).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let coords = a.pca.transform(&z).map_err(|e| ApiError::internal(e.to_string()))?;
    let nearest = nearest_label(a, &coords)?;
    Ok(Json(json!({ "coords": coords, "nearest_label": nearest, "resized": resized })))
}

async fn compare(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<recognition::CompareResponse>> {
    let a = state.artifacts()?;
    let req: CompareRequest = parse_json(&body)?;
    let probe = recognition::decode_image_b64(&req.probe).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if probe.width() != a.autoencoder.input_width() || probe.height() != a.autoencoder.input_height() {
        return Err(ApiError::bad_request(format!(
            "probe is {}x{}, gallery images are {}x{}",
            probe.width(),
            probe.height(),
            a.autoencoder.input_width(),
            a.autoencoder.input_height()
        )));
    }
    let results = a.simulator.compare(&probe).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(recognition::CompareResponse { results }))
}

#[derive(Debug, Deserialize)]
struct SweepRequest {
    #[serde(flatten)]
    spec: SweepSpec,
    base_coords: Vec<f64>,
    #[serde(default)]
    true_label: Option<String>,
}

async fn submit_sweep(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let a = state.artifacts()?;
    let req: SweepRequest = parse_json(&body)?;
    let coords = coords_from(req.base_coords)?;
    match req.spec.validate() {
        Ok(()) => {}
        Err(e @ ManipulateError::GridTooLarge { .. }) => {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "grid_too_large", e.to_string()))
        }
        Err(e) => return Err(ApiError::bad_request(e.to_string())),
    }
    let label = match req.true_label {
        Some(l) => {
            check_label(a, &l)?;
            l
        }
        None => nearest_label(a, &coords)?,
    };
    let strategy = Strategy::Sweep { base: CoordsSource::Explicit { coords, label }, spec: req.spec };
    let run_id = attack::run_id_for(&strategy, &state.experiment);

    let mut sweeps = state.sweeps.lock().unwrap();
    let status = match sweeps.get(&run_id) {
        Some(s @ (SweepStatus::Queued | SweepStatus::Running | SweepStatus::Done)) => s.clone(),
        _ => {
            let tx = state.sweep_tx.as_ref().ok_or_else(|| ApiError::internal("sweep worker not running"))?;
            tx.send(SweepJob { run_id: run_id.clone(), strategy }).map_err(|e| ApiError::internal(e.to_string()))?;
            sweeps.insert(run_id.clone(), SweepStatus::Queued);
            SweepStatus::Queued
        }
    };
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id, "status": status }))))
}

async fn sweep_result(State(state): State<Arc<AppState>>, Path(run_id): Path<String>) -> ApiResult<Response> {
    let status = state.sweeps.lock().unwrap().get(&run_id).cloned();
    match status {
        Some(SweepStatus::Queued | SweepStatus::Running) => {
            let status = status.unwrap();
            Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id, "status": status }))).into_response())
        }
        Some(SweepStatus::Failed { message }) => {
            Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "sweep_failed", message))
        }
        Some(SweepStatus::Done) | None => {
            if run_id.contains(['/', '\\']) || run_id.starts_with('.') {
                return Err(ApiError::bad_request("invalid run id"));
            }
            match state.layout.load_report(&run_id) {
                Ok(report) => Ok(Json(report).into_response()),
                Err(WorkspaceError::Missing { .. }) => {
                    Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown run {run_id}")))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

async fn list_bookmarks(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<workspace::Bookmark>>> {
    let _guard = state.bookmarks.lock().await;
    Ok(Json(workspace::load_bookmarks(&state.layout)?))
}

async fn add_bookmark(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<workspace::Bookmark>)> {
    let new: NewBookmark = parse_json(&body)?;
    let _guard = state.bookmarks.lock().await;
    let saved = workspace::add_bookmark(&state.layout, new)?;
    Ok((StatusCode::CREATED, Json(saved)))
}

async fn baselines(State(state): State<Arc<AppState>>) -> ApiResult<Json<recognition::BaselineStats>> {
    Ok(Json(state.artifacts()?.baselines.clone()))
}

async fn reports(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<String>>> {
    Ok(Json(state.layout.list_reports()?))
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let app = router(state);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
