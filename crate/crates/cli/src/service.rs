//! HTTP service under `/v1`.
//!
//! Optimizations run as jobs: `POST /v1/optimize` validates the request,
//! queues it and answers 202 with an id; a bounded pool of workers runs the
//! searches on blocking threads. Finished jobs are dropped after the TTL.
//! The name model is loaded once and shared read-only.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blendpal::names::NameModel;
use blendpal::report::{NameModelInfo, SolutionDocument};
use blendpal::stimulus::StimulusParams;
use serde::Serialize;
use tokio::sync::Semaphore;

use crate::engine::{self, OptimizeRequest, ScoreRequest, TraceSummary};
use crate::error::{ApiError, Kind};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub workers: usize,
    pub ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            workers: 2,
            ttl: Duration::from_secs(3600),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobResult {
    pub document: SolutionDocument,
    pub trace: TraceSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobRecord {
    pub id: String,
    pub status: JobStatus,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<JobResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
    #[serde(skip)]
    finished: Option<Instant>,
}

pub struct AppState {
    model: Arc<NameModel>,
    jobs: Mutex<HashMap<String, JobRecord>>,
    permits: Arc<Semaphore>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(model: NameModel, config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            model: Arc::new(model),
            jobs: Mutex::new(HashMap::new()),
            permits: Arc::new(Semaphore::new(config.workers.max(1))),
            config,
        })
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        let mut jobs = self.jobs.lock().expect("job table poisoned");
        if let Some(job) = jobs.get_mut(id) {
            let before = job.status;
            f(job);
            debug_assert!(job.status >= before, "job status went backwards");
            if job.status >= JobStatus::Done {
                job.finished.get_or_insert_with(Instant::now);
            }
        }
    }

    /// Drops finished jobs older than the TTL. Returns how many were removed.
    pub fn sweep(&self) -> usize {
        let ttl = self.config.ttl;
        let mut jobs = self.jobs.lock().expect("job table poisoned");
        let before = jobs.len();
        jobs.retain(|_, j| j.finished.is_none_or(|t| t.elapsed() < ttl));
        before - jobs.len()
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.sweep();
        self.jobs.lock().expect("job table poisoned").get(id).cloned()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::bad_input("malformed_json", "body is not UTF-8"))?;
    ApiError::parse_json(text)
}

#[derive(Serialize)]
struct Accepted {
    id: String,
    status: JobStatus,
}

async fn submit(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: OptimizeRequest = parse_body(&body)?;
    let scene = engine::prepare(&req)?;
    let id = uuid::Uuid::new_v4().to_string();
    state.jobs.lock().expect("job table poisoned").insert(
        id.clone(),
        JobRecord {
            id: id.clone(),
            status: JobStatus::Queued,
            seed: req.schedule.seed,
            result: None,
            error: None,
            finished: None,
        },
    );
    let job_state = state.clone();
    let job_id = id.clone();
    tokio::spawn(async move {
        let Ok(_permit) = job_state.permits.clone().acquire_owned().await else {
            return;
        };
        job_state.update(&job_id, |j| j.status = JobStatus::Running);
        let model = job_state.model.clone();
        let run = tokio::task::spawn_blocking(move || engine::run_optimize(&scene, &model, &req)).await;
        let outcome = match run {
            Ok(r) => r,
            Err(e) => Err(ApiError::internal(format!("worker failed: {e}"))),
        };
        job_state.update(&job_id, |j| match outcome {
            Ok((document, trace)) => {
                j.result = Some(JobResult {
                    document,
                    trace: TraceSummary::of(&trace),
                });
                j.status = JobStatus::Done;
            }
            Err(e) => {
                j.error = Some(e);
                j.status = JobStatus::Failed;
            }
        });
    });
    let location = format!("/v1/jobs/{id}");
    Ok((
        StatusCode::ACCEPTED,
        [(header::LOCATION, location)],
        Json(Accepted {
            id,
            status: JobStatus::Queued,
        }),
    )
        .into_response())
}

async fn job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<JobRecord>, ApiError> {
    state
        .job(&id)
        .map(Json)
        .ok_or_else(|| ApiError::new(Kind::NotFound, "job_not_found", format!("no job {id:?} (unknown or expired)")).at("id"))
}

async fn score(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: ScoreRequest = parse_body(&body)?;
    let model = state.model.clone();
    let breakdown = tokio::task::spawn_blocking(move || engine::run_score(&model, &req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(breakdown).into_response())
}

async fn stimuli(body: Bytes) -> Result<Response, ApiError> {
    let params: StimulusParams = parse_body(&body)?;
    let stim = tokio::task::spawn_blocking(move || engine::run_stimulus(&params))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(stim).into_response())
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    name_model: NameModelInfo,
    workers: usize,
    jobs: usize,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    let jobs = state.jobs.lock().expect("job table poisoned").len();
    Json(Health {
        status: "ok",
        name_model: NameModelInfo::of(&state.model),
        workers: state.config.workers,
        jobs,
    })
}

async fn fallback() -> ApiError {
    ApiError::new(Kind::NotFound, "no_route", "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/optimize", post(submit))
        .route("/v1/jobs/:id", get(job))
        .route("/v1/score", post(score))
        .route("/v1/stimuli", post(stimuli))
        .route("/v1/healthz", get(healthz))
        .fallback(fallback)
        .with_state(state)
}

/// Binds and serves until interrupted.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> Result<(), ApiError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ApiError::internal(format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on {}", listener.local_addr().map_or(addr, |a| a));
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(30).min(sweeper.config.ttl.max(Duration::from_secs(1))));
        loop {
            tick.tick().await;
            let n = sweeper.sweep();
            if n > 0 {
                log::debug!("expired {n} job(s)");
            }
        }
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))
}
