//! HTTP service over the simulator.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/scenarios` | store a scenario, returns its id |
//! | GET | `/scenarios` | list scenarios |
//! | GET, PUT | `/scenarios/{id}` | read, or add a new version |
//! | POST | `/runs` | `{scenario_id, seed?, crn?}` queue a run |
//! | GET | `/runs/{id}` | run handle with state and progress |
//! | POST | `/runs/{id}/stop` | cooperative stop at the next day boundary |
//! | GET | `/runs/{id}/results`, `/runs/{id}/results.csv` | finished results |
//! | GET | `/compare?a=&b=` | per-node deltas between two finished runs |
//!
//! Scenarios and results live as files under the data directory. A scenario
//! id is the digest of its first version's canonical JSON.

mod store;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use supsim_core::experiments::{replicate, ReplicateOptions, ScenarioResult};
use supsim_core::export::write_csv;
use supsim_core::model::{RunControl, SimError};
use supsim_core::scenario::ScenarioConfig;
use tokio::sync::Semaphore;

pub use store::{Store, StoredScenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHandle {
    pub run_id: String,
    pub scenario_id: String,
    pub scenario_version: u32,
    pub state: RunState,
    /// Fraction of simulated days completed over all replications.
    pub progress: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub created_at: u64,
    pub config: ScenarioConfig,
}

struct RunEntry {
    handle: RunHandle,
    control: RunControl,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: Store,
    runs: Mutex<BTreeMap<String, RunEntry>>,
    next_run: Mutex<u64>,
    permits: Arc<Semaphore>,
    /// Replication threads per run.
    threads: usize,
}

impl AppState {
    /// `jobs` caps how many runs simulate at once.
    pub fn open(data_dir: impl Into<PathBuf>, jobs: usize) -> std::io::Result<Self> {
        Ok(AppState {
            inner: Arc::new(Inner {
                store: Store::open(data_dir.into())?,
                runs: Mutex::new(BTreeMap::new()),
                next_run: Mutex::new(1),
                permits: Arc::new(Semaphore::new(jobs.max(1))),
                threads: 1,
            }),
        })
    }
}

impl AppState {
    /// Store `config` as a scenario and return its id.
    pub fn preload(&self, config: ScenarioConfig) -> std::io::Result<String> {
        Ok(self.inner.store.create(config)?.0.id)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", post(create_scenario).get(list_scenarios))
        .route("/scenarios/{id}", get(get_scenario).put(update_scenario))
        .route("/runs", post(start_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/stop", post(stop_run))
        .route("/runs/{id}/results", get(get_results))
        .route("/runs/{id}/results.csv", get(get_results_csv))
        .route("/compare", get(compare))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} {id}"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse_config(body: &str) -> Result<ScenarioConfig, ApiError> {
    ScenarioConfig::from_json(body).map_err(|e| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        body: json!({ "error": e.to_string(), "path": e.path, "line": e.line, "column": e.column }),
    })
}

async fn create_scenario(State(st): State<AppState>, body: String) -> Result<Response, ApiError> {
    let config = parse_config(&body)?;
    let (scenario, created) = st.inner.store.create(config).map_err(ApiError::internal)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(scenario)).into_response())
}

async fn list_scenarios(State(st): State<AppState>) -> Json<serde_json::Value> {
    let list: Vec<_> = st
        .inner
        .store
        .list()
        .into_iter()
        .map(|s| json!({ "id": s.id, "version": s.version, "name": s.config.name }))
        .collect();
    Json(json!(list))
}

#[derive(Deserialize)]
struct VersionQuery {
    version: Option<u32>,
}

async fn get_scenario(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<VersionQuery>,
) -> Result<Json<StoredScenario>, ApiError> {
    st.inner
        .store
        .get(&id, q.version)
        .map(Json)
        .ok_or_else(|| ApiError::not_found("scenario", &id))
}

async fn update_scenario(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> Result<Json<StoredScenario>, ApiError> {
    if st.inner.store.get(&id, None).is_none() {
        return Err(ApiError::not_found("scenario", &id));
    }
    let config = parse_config(&body)?;
    st.inner
        .store
        .update(&id, config)
        .map_err(ApiError::internal)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found("scenario", &id))
}

/// Body of `POST /runs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub scenario_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crn: Option<bool>,
}

pub fn parse_run_request(body: &str) -> Result<RunRequest, String> {
    serde_json::from_str(body).map_err(|e| e.to_string())
}

async fn start_run(State(st): State<AppState>, body: String) -> Result<Response, ApiError> {
    let req = parse_run_request(&body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;
    let scenario = st
        .inner
        .store
        .get(&req.scenario_id, req.version)
        .ok_or_else(|| ApiError::not_found("scenario", &req.scenario_id))?;
    let mut config = scenario.config;
    if let Some(seed) = req.seed {
        config.run.master_seed = seed;
    }
    if let Some(crn) = req.crn {
        config.run.crn = crn;
    }
    let run_id = {
        let mut n = st.inner.next_run.lock().unwrap();
        let id = format!("run-{n}");
        *n += 1;
        id
    };
    let handle = RunHandle {
        run_id: run_id.clone(),
        scenario_id: scenario.id,
        scenario_version: scenario.version,
        state: RunState::Queued,
        progress: 0.0,
        reason: None,
        created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config,
    };
    let control = RunControl::default();
    st.inner.runs.lock().unwrap().insert(
        run_id.clone(),
        RunEntry {
            handle: handle.clone(),
            control: control.clone(),
        },
    );
    tokio::spawn(execute(st.clone(), run_id, control));
    Ok((StatusCode::ACCEPTED, Json(handle)).into_response())
}

fn set_state(st: &AppState, run_id: &str, state: RunState, reason: Option<String>) {
    if let Some(e) = st.inner.runs.lock().unwrap().get_mut(run_id) {
        e.handle.state = state;
        e.handle.reason = reason;
        if state == RunState::Done {
            e.handle.progress = 1.0;
        }
    }
}

async fn execute(st: AppState, run_id: String, control: RunControl) {
    let Ok(_permit) = st.inner.permits.clone().acquire_owned().await else {
        return;
    };
    if control.cancel.load(Ordering::SeqCst) {
        set_state(&st, &run_id, RunState::Failed, Some("stopped".into()));
        return;
    }
    let config = match st.inner.runs.lock().unwrap().get(&run_id) {
        Some(e) => e.handle.config.clone(),
        None => return,
    };
    set_state(&st, &run_id, RunState::Running, None);
    let opts = ReplicateOptions {
        jobs: st.inner.threads,
        control: Some(control),
    };
    let outcome = tokio::task::spawn_blocking(move || replicate(&config, &opts)).await;
    match outcome {
        Ok(Ok(result)) => match st.inner.store.publish_results(&run_id, &result) {
            Ok(()) => set_state(&st, &run_id, RunState::Done, None),
            Err(e) => set_state(&st, &run_id, RunState::Failed, Some(e.to_string())),
        },
        Ok(Err(SimError::Cancelled)) => set_state(&st, &run_id, RunState::Failed, Some("stopped".into())),
        Ok(Err(e)) => set_state(&st, &run_id, RunState::Failed, Some(e.to_string())),
        Err(e) => set_state(&st, &run_id, RunState::Failed, Some(e.to_string())),
    }
}

fn handle(st: &AppState, run_id: &str) -> Result<RunHandle, ApiError> {
    let runs = st.inner.runs.lock().unwrap();
    let e = runs.get(run_id).ok_or_else(|| ApiError::not_found("run", run_id))?;
    let mut h = e.handle.clone();
    if h.state == RunState::Running {
        let total = h.config.run.run_length_days as f64 * h.config.run.replications as f64;
        let done = e.control.days_done.load(Ordering::SeqCst) as f64;
        h.progress = (done / total).min(1.0);
    }
    Ok(h)
}

async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<RunHandle>, ApiError> {
    handle(&st, &id).map(Json)
}

async fn stop_run(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<RunHandle>, ApiError> {
    {
        let runs = st.inner.runs.lock().unwrap();
        let e = runs.get(&id).ok_or_else(|| ApiError::not_found("run", &id))?;
        e.control.stop();
    }
    handle(&st, &id).map(Json)
}

fn finished(st: &AppState, run_id: &str) -> Result<ScenarioResult, ApiError> {
    let h = handle(st, run_id)?;
    if h.state != RunState::Done {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("run {run_id} is {}", serde_json::to_value(h.state).unwrap().as_str().unwrap_or("")),
        ));
    }
    st.inner.store.results(run_id).map_err(ApiError::internal)
}

async fn get_results(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    finished(&st, &id)?;
    let body = st.inner.store.results_json(&id).map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn get_results_csv(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let result = finished(&st, &id)?;
    let mut buf = Vec::new();
    write_csv(&[result], &mut buf).map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], buf).into_response())
}

#[derive(Deserialize)]
struct CompareQuery {
    a: Option<String>,
    b: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodeDelta {
    pub node_id: u32,
    pub node_kind: String,
    pub fill_rate_orders_a: f64,
    pub fill_rate_orders_b: f64,
    pub fill_rate_orders_delta: f64,
    pub fill_rate_quantity_delta: f64,
    pub avg_on_hand_delta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub nodes: Vec<NodeDelta>,
    pub warnings: Vec<String>,
}

async fn compare(State(st): State<AppState>, Query(q): Query<CompareQuery>) -> Result<Json<Comparison>, ApiError> {
    let (Some(a), Some(b)) = (q.a, q.b) else {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "both a and b are required"));
    };
    let (ha, hb) = (handle(&st, &a)?, handle(&st, &b)?);
    let (ra, rb) = (finished(&st, &a)?, finished(&st, &b)?);
    let mut warnings = Vec::new();
    if ha.config.run.master_seed != hb.config.run.master_seed {
        warnings.push(format!(
            "seeds differ ({} vs {}): deltas include sampling noise",
            ha.config.run.master_seed, hb.config.run.master_seed
        ));
    }
    if !(ha.config.run.crn && hb.config.run.crn) {
        warnings.push("common random numbers are not on for both runs".into());
    }
    let nodes = ra
        .aggregate
        .iter()
        .filter_map(|x| {
            let y = rb.aggregate.iter().find(|y| y.node_id == x.node_id && y.node_kind == x.node_kind)?;
            Some(NodeDelta {
                node_id: x.node_id.0,
                node_kind: x.node_kind.as_str().into(),
                fill_rate_orders_a: x.fill_rate_orders.mean,
                fill_rate_orders_b: y.fill_rate_orders.mean,
                fill_rate_orders_delta: y.fill_rate_orders.mean - x.fill_rate_orders.mean,
                fill_rate_quantity_delta: y.fill_rate_quantity.mean - x.fill_rate_quantity.mean,
                avg_on_hand_delta: y.avg_on_hand.mean - x.avg_on_hand.mean,
            })
        })
        .collect::<Vec<_>>();
    if nodes.len() != ra.aggregate.len() || nodes.len() != rb.aggregate.len() {
        warnings.push("networks differ: only common nodes are compared".into());
    }
    Ok(Json(Comparison { a, b, nodes, warnings }))
}
