//! HTTP session service under `/v1`.
//!
//! Each session serializes its writers (recommend, observe) while reads are
//! served from the last committed snapshot. Every accepted write is appended
//! to the session's event log before it becomes visible.

mod error;
mod store;

pub use error::ApiError;
pub use store::Store;

use std::collections::HashMap;
use std::future::Future;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use abcd::belief::{InterventionSpec, Sample};
use abcd::session::{HistoryEntry, RecommendationView, Session, SessionConfig, SessionEvent, SessionView};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

struct Slot {
    snapshot: RwLock<Arc<Session>>,
    writer: tokio::sync::Mutex<()>,
    recommending: AtomicBool,
}

impl Slot {
    fn new(s: Session) -> Self {
        Self { snapshot: RwLock::new(Arc::new(s)), writer: tokio::sync::Mutex::new(()), recommending: AtomicBool::new(false) }
    }

    fn current(&self) -> Arc<Session> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn commit(&self, s: Session) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(s);
    }
}

/// Clears the recommending flag on every exit path.
struct Busy<'a>(&'a AtomicBool);

impl Drop for Busy<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    keys: tokio::sync::Mutex<HashMap<String, String>>,
    store: Option<Store>,
}

impl AppState {
    /// In-memory only; nothing survives a restart.
    pub fn ephemeral() -> Arc<Self> {
        Arc::new(Self { sessions: RwLock::default(), keys: Default::default(), store: None })
    }

    /// Restores every session found in the store.
    pub fn restore(store: Store) -> std::io::Result<Arc<Self>> {
        let sessions = store.load_all()?;
        let keys = store.load_keys()?;
        log::info!("restored {} session(s) from {}", sessions.len(), store.dir().display());
        let map = sessions.into_iter().map(|s| (s.id().to_string(), Arc::new(Slot::new(s)))).collect();
        Ok(Arc::new(Self { sessions: RwLock::new(map), keys: tokio::sync::Mutex::new(keys), store: Some(store) }))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("sessions lock").len()
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions.read().expect("sessions lock").get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    fn persist(&self, id: &str, e: &SessionEvent) -> Result<(), ApiError> {
        if let Some(store) = &self.store {
            store.append(id, e).map_err(|err| ApiError::internal(format!("could not persist event: {err}")))?;
        }
        Ok(())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/recommend", post(recommend))
        .route("/v1/sessions/{id}/observe", post(observe))
        .route("/v1/sessions/{id}/curve", get(curve))
        .with_state(state)
}

/// Serve until `shutdown` resolves. Sessions are persisted on every write,
/// so nothing is lost at shutdown.
pub async fn serve(listener: TcpListener, state: Arc<AppState>, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::bad_body)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))
}

#[derive(Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

async fn healthz() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub revision: u64,
    pub state: SessionView,
}

async fn create_session(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let cfg: SessionConfig = parse(&body)?;
    let key = headers.get(IDEMPOTENCY_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string);
    // held across creation so that concurrent retries with one key cannot race
    let mut keys = app.keys.lock().await;
    if let Some(id) = key.as_ref().and_then(|k| keys.get(k)) {
        let s = app.slot(id)?.current();
        return Ok((StatusCode::OK, Json(Created { id: s.id().into(), revision: s.revision(), state: s.view() })));
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = {
        let (id, cfg) = (id.clone(), cfg.clone());
        blocking(move || Session::create(id, cfg)).await??
    };
    app.persist(&id, &SessionEvent::Created { id: id.clone(), config: cfg })?;
    if let Some(k) = key {
        if let Some(store) = &app.store {
            store.remember_key(&k, &id).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        keys.insert(k, id.clone());
    }
    let view = session.view();
    app.sessions.write().expect("sessions lock").insert(id.clone(), Arc::new(Slot::new(session)));
    log::info!("created session {id}");
    Ok((StatusCode::CREATED, Json(Created { id, revision: 0, state: view })))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(app.slot(&id)?.current().view()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Recommended {
    pub revision: u64,
    pub converged: bool,
    #[serde(flatten)]
    pub recommendation: RecommendationView,
}

async fn recommend(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Recommended>, ApiError> {
    let slot = app.slot(&id)?;
    if slot.recommending.swap(true, Ordering::SeqCst) {
        return Err(ApiError::busy());
    }
    let _busy = Busy(&slot.recommending);
    let _writer = slot.writer.lock().await;
    let snapshot = slot.current();
    let r = {
        let s = snapshot.clone();
        blocking(move || s.compute_recommendation()).await??
    };
    app.persist(&id, &SessionEvent::Recommended { recommendation: r.clone() })?;
    let mut next = (*snapshot).clone();
    next.set_pending(r.clone());
    let out = Recommended { revision: next.revision(), converged: next.converged(), recommendation: r };
    slot.commit(next);
    Ok(Json(out))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveBody {
    /// `null` for an observational sample.
    pub intervention: InterventionSpec,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Observed {
    pub revision: u64,
    pub posterior: Vec<f64>,
    pub entropy: f64,
    pub edge_marginals: Vec<Vec<f64>>,
    pub converged: bool,
    pub entry: HistoryEntry,
}

async fn observe(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<Observed>, ApiError> {
    let slot = app.slot(&id)?;
    let body: ObserveBody = parse(&body)?;
    let sample = Sample { values: body.values, intervention: body.intervention };
    let _writer = slot.writer.lock().await;
    let mut next = (*slot.current()).clone();
    let entry = next.observe(sample.clone()).map_err(|e| {
        let err = ApiError::from(e);
        if err.field.is_none() && err.status == StatusCode::UNPROCESSABLE_ENTITY {
            err.with_field("values")
        } else {
            err
        }
    })?;
    let entry = entry.clone();
    app.persist(&id, &SessionEvent::Observed { sample })?;
    let out = Observed {
        revision: next.revision(),
        posterior: entry.posterior.clone(),
        entropy: entry.entropy,
        edge_marginals: next.belief().edge_marginals(),
        converged: next.converged(),
        entry,
    };
    slot.commit(next);
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
pub struct CurveQuery {
    pub graph: usize,
    pub node: usize,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CurveResponse {
    pub revision: u64,
    pub graph: usize,
    pub node: usize,
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

async fn curve(State(app): State<Arc<AppState>>, Path(id): Path<String>, q: Result<Query<CurveQuery>, axum::extract::rejection::QueryRejection>) -> Result<Json<CurveResponse>, ApiError> {
    let Query(q) = q.map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_query", e.body_text()))?;
    let s = app.slot(&id)?.current();
    let c = s.curve(q.graph, q.node, q.lo, q.hi).map_err(|e| {
        let field = if matches!(e, abcd::Error::InvalidGraph(_)) { "node" } else { "graph" };
        ApiError::from(e).with_field(field)
    })?;
    Ok(Json(CurveResponse { revision: s.revision(), graph: q.graph, node: q.node, grid: c.grid, mean: c.mean, lower: c.lower, upper: c.upper }))
}
