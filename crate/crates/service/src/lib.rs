// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! HTTP API over the component inventory.
//!
//! Every mutation goes through one [`Inventory`] behind a mutex, so the
//! journal has a single writer. After a mutation commits, a fresh copy of
//! the store is published, and reads are answered from that copy without
//! touching the lock. A client that got a response to a mutation will see
//! its effect on the next read.

pub mod auth;

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clearway_core::inventory::{
    ClearanceState, ComponentId, ComponentRecord, DecisionInput, DecisionVerdict, Inventory, InventoryError,
    QueueFilter, ReleaseId, Store, SystemClock,
};
use clearway_core::policy::{ProductEvaluation, DEFAULT_POLICY_VERSION};
use clearway_core::{Coordinates, LicenseExpression};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use auth::{Role, Session, Tokens};

pub const TOTAL_COUNT: &str = "x-total-count";
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 100;

/// Resolves a product id to a verdict. The service knows nothing about
/// manifests or dependency graphs; whoever embeds it supplies this.
pub trait ProductEvaluator: Send + Sync {
    /// `None` when the product is unknown.
    fn evaluate(&self, product_id: &str, store: &Store) -> Option<Result<ProductEvaluation, String>>;

    /// Recorded on every decision taken through the API.
    fn policy_version(&self) -> String {
        DEFAULT_POLICY_VERSION.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub token_file: PathBuf,
    pub journal: PathBuf,
    /// Origins allowed to call the API from a browser.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            token_file: PathBuf::from("tokens.json"),
            journal: PathBuf::from("inventory.jsonl"),
            cors_origins: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    Tokens(String),
    #[error("cannot open journal {path}: {source}")]
    Journal {
        path: PathBuf,
        #[source]
        source: Box<InventoryError>,
    },
    #[error("invalid CORS origin `{0}`")]
    Cors(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

/// Shared by every request handler.
#[derive(Clone)]
pub struct AppState {
    inventory: Arc<Mutex<Inventory>>,
    snapshot: Arc<RwLock<Arc<Store>>>,
    tokens: Arc<Tokens>,
    evaluator: Option<Arc<dyn ProductEvaluator>>,
}

impl AppState {
    pub fn new(inventory: Inventory, tokens: Tokens) -> Self {
        let snapshot = Arc::new(inventory.store().clone());
        Self {
            inventory: Arc::new(Mutex::new(inventory)),
            snapshot: Arc::new(RwLock::new(snapshot)),
            tokens: Arc::new(tokens),
            evaluator: None,
        }
    }

    pub fn with_evaluator(mut self, evaluator: Arc<dyn ProductEvaluator>) -> Self {
        self.evaluator = Some(evaluator);
        self
    }

    /// The store as last published to readers.
    pub fn snapshot(&self) -> Arc<Store> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock"))
    }

    /// Runs `f` with the single writer and publishes the result.
    fn mutate<T>(&self, f: impl FnOnce(&mut Inventory) -> Result<T, InventoryError>) -> Result<T, InventoryError> {
        let mut inventory = self.inventory.lock().expect("inventory lock");
        let before = inventory.store().last_seq();
        let out = f(&mut inventory);
        if inventory.store().last_seq() != before {
            *self.snapshot.write().expect("snapshot lock") = Arc::new(inventory.store().clone());
        }
        out
    }

    fn policy_version(&self) -> String {
        self.evaluator
            .as_ref()
            .map_or_else(|| DEFAULT_POLICY_VERSION.to_string(), |e| e.policy_version())
    }
}

/// Error body for every non-2xx answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            details: Value::Null,
        }
    }

    fn details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    fn unauthenticated() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "unauthenticated",
            "missing or unknown bearer token",
        )
    }

    fn bad_parameter(name: &str, value: &str) -> Self {
        Self::new(
            StatusCode::BAD_REQUEST,
            "invalid_parameter",
            format!("invalid value for `{name}`"),
        )
        .details(json!({ "parameter": name, "value": value }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut response = (self.status, Json(&self)).into_response();
        if self.status == StatusCode::UNAUTHORIZED {
            response
                .headers_mut()
                .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
        }
        response
    }
}

impl From<InventoryError> for ApiError {
    fn from(err: InventoryError) -> Self {
        let message = err.to_string();
        match err {
            InventoryError::UnknownRelease(id) => {
                Self::new(StatusCode::NOT_FOUND, "not_found", message).details(json!({ "release_id": id }))
            }
            InventoryError::IllegalTransition { release, from, action } => {
                Self::new(StatusCode::CONFLICT, "illegal_transition", message)
                    .details(json!({ "release_id": release, "state": from, "action": action }))
            }
            InventoryError::Unauthorized(_) => Self::new(StatusCode::FORBIDDEN, "forbidden", message),
            InventoryError::InvalidDecision(_) | InventoryError::InvalidCoordinates(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
            }
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// One row of `GET /api/v1/components`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub id: ComponentId,
    pub canonical_name: String,
    pub aliases: Vec<Coordinates>,
    pub homepage: Option<String>,
    pub releases: Vec<ReleaseSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseSummary {
    pub id: ReleaseId,
    pub version: String,
    pub coords: Coordinates,
    pub state: ClearanceState,
    pub effective_license: Option<LicenseExpression>,
}

impl From<&ComponentRecord> for ComponentSummary {
    fn from(c: &ComponentRecord) -> Self {
        Self {
            id: c.id,
            canonical_name: c.canonical_name.clone(),
            aliases: c.aliases.iter().cloned().collect(),
            homepage: c.homepage.clone(),
            releases: c
                .releases
                .values()
                .map(|r| ReleaseSummary {
                    id: r.id,
                    version: r.version.clone(),
                    coords: r.coords.clone(),
                    state: r.state,
                    effective_license: r.effective_license().cloned(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionBody {
    pub verdict: DecisionVerdict,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearanceRequested {
    pub request_id: u64,
    pub release_id: ReleaseId,
    pub state: ClearanceState,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/components", get(list_components))
        .route("/api/v1/components/{id}", get(get_component))
        .route("/api/v1/clearance-queue", get(list_queue))
        .route("/api/v1/releases/{id}/clearance-request", post(request_clearance))
        .route("/api/v1/releases/{id}/decision", post(decide))
        .route("/api/v1/releases/{id}/findings", get(findings))
        .route("/api/v1/products/{id}/verdict", get(product_verdict))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

pub fn cors_layer(origins: &[String]) -> Result<CorsLayer, ServiceError> {
    let origins = origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| ServiceError::Cors(o.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE])
        .expose_headers([HeaderName::from_static(TOTAL_COUNT)]))
}

fn session<'a>(state: &'a AppState, headers: &HeaderMap) -> ApiResult<&'a Session> {
    state.tokens.authenticate(headers).ok_or_else(ApiError::unauthenticated)
}

fn parse_id(raw: &str) -> ApiResult<u64> {
    raw.parse().map_err(|_| ApiError::bad_parameter("id", raw))
}

struct Page {
    number: usize,
    size: usize,
}

impl Page {
    fn from_query(q: &HashMap<String, String>) -> ApiResult<Self> {
        let number = match q.get("page") {
            None => 1,
            Some(v) => v
                .parse()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| ApiError::bad_parameter("page", v))?,
        };
        let size = match q.get("page_size") {
            None => DEFAULT_PAGE_SIZE,
            Some(v) => v
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| ApiError::bad_parameter("page_size", v))?
                .min(MAX_PAGE_SIZE),
        };
        Ok(Self { number, size })
    }

    fn slice<T: Serialize>(&self, items: Vec<T>) -> Response {
        let total = items.len();
        let page: Vec<T> = items
            .into_iter()
            .skip((self.number - 1).saturating_mul(self.size))
            .take(self.size)
            .collect();
        let mut response = Json(page).into_response();
        response.headers_mut().insert(TOTAL_COUNT, HeaderValue::from(total));
        response
    }
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_components(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    session(&state, &headers)?;
    let page = Page::from_query(&q)?;
    let store = state.snapshot();
    let ecosystem = q.get("ecosystem");
    let rows: Vec<ComponentSummary> = store
        .components()
        .filter(|c| ecosystem.is_none_or(|eco| c.aliases.iter().any(|a| &a.ecosystem == eco)))
        .map(ComponentSummary::from)
        .collect();
    Ok(page.slice(rows))
}

async fn get_component(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<ComponentRecord>> {
    session(&state, &headers)?;
    let id = ComponentId(parse_id(&id)?);
    let store = state.snapshot();
    store
        .component(id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown component {id}")))
}

async fn list_queue(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    session(&state, &headers)?;
    let page = Page::from_query(&q)?;
    let filter = QueueFilter {
        state: match q.get("state") {
            None => None,
            Some(v) => Some(ClearanceState::parse(v).ok_or_else(|| ApiError::bad_parameter("state", v))?),
        },
        ecosystem: q.get("ecosystem").cloned(),
    };
    Ok(page.slice(state.snapshot().queue(&filter)))
}

async fn request_clearance(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<ClearanceRequested>> {
    session(&state, &headers)?;
    let release = ReleaseId(parse_id(&id)?);
    let worker = state.clone();
    let request_id = tokio::task::spawn_blocking(move || worker.mutate(|inv| inv.request_clearance(release)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(ClearanceRequested {
        request_id: request_id.0,
        release_id: release,
        state: ClearanceState::PendingReview,
    }))
}

async fn decide(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = session(&state, &headers)?.clone();
    if session.role != Role::Reviewer {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "forbidden",
            "only reviewers may record clearance decisions",
        )
        .details(json!({ "role": session.role })));
    }
    let release = ReleaseId(parse_id(&id)?);
    let body: DecisionBody = serde_json::from_slice(&body).map_err(|e| {
        let status = if e.is_data() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::BAD_REQUEST
        };
        ApiError::new(status, "invalid_body", e.to_string())
    })?;
    let input = DecisionInput {
        reviewer: session.identity,
        role: session.role.as_str().to_string(),
        verdict: body.verdict,
        rationale: body.rationale,
        policy_version: state.policy_version(),
    };
    let worker = state.clone();
    let record = tokio::task::spawn_blocking(move || worker.mutate(|inv| inv.decide(release, input).cloned()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(record).into_response())
}

async fn findings(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    session(&state, &headers)?;
    let id = ReleaseId(parse_id(&id)?);
    let store = state.snapshot();
    let release = store.release(id).ok_or(InventoryError::UnknownRelease(id))?;
    Ok(Json(json!({
        "release_id": release.id,
        "coords": release.coords,
        "state": release.state,
        "declared_license": release.declared_license,
        "detected_license": release.detected_license,
        "findings": release.findings,
        "copyrights": release.copyrights,
    })))
}

async fn product_verdict(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<ProductEvaluation>> {
    session(&state, &headers)?;
    let unknown = || ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown product `{id}`"));
    let evaluator = state.evaluator.as_ref().ok_or_else(unknown)?;
    let store = state.snapshot();
    match evaluator.evaluate(&id, &store) {
        None => Err(unknown()),
        Some(Ok(evaluation)) => Ok(Json(evaluation)),
        Some(Err(message)) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "evaluation_failed",
            message,
        )),
    }
}

/// A bound, running server.
pub struct RunningService {
    addr: SocketAddr,
    state: AppState,
    stop: tokio::sync::oneshot::Sender<()>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl RunningService {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    /// Stops accepting connections, lets in-flight requests finish, then
    /// releases the journal.
    pub async fn shutdown(self) -> std::io::Result<()> {
        let _ = self.stop.send(());
        let served = self.task.await.map_err(|e| std::io::Error::other(e.to_string()))?;
        drop(self.state);
        served
    }

    /// Runs until `signal` resolves, then shuts down.
    pub async fn run_until(self, signal: impl Future<Output = ()>) -> std::io::Result<()> {
        signal.await;
        self.shutdown().await
    }
}

/// Loads tokens, replays the journal and binds the listener. Every startup
/// failure is reported before anything is served.
pub async fn start(
    config: &ServiceConfig,
    evaluator: Option<Arc<dyn ProductEvaluator>>,
) -> Result<RunningService, ServiceError> {
    let tokens = Tokens::load(&config.token_file).map_err(ServiceError::Tokens)?;
    let inventory =
        Inventory::open(&config.journal, Arc::new(SystemClock)).map_err(|source| ServiceError::Journal {
            path: config.journal.clone(),
            source: Box::new(source),
        })?;
    let mut state = AppState::new(inventory, tokens);
    if let Some(e) = evaluator {
        state = state.with_evaluator(e);
    }
    let mut app = router(state.clone());
    if !config.cors_origins.is_empty() {
        app = app.layer(cors_layer(&config.cors_origins)?);
    }
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.listen,
            source,
        })?;
    let addr = listener.local_addr().map_err(|source| ServiceError::Bind {
        addr: config.listen,
        source,
    })?;
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(RunningService {
        addr,
        state,
        stop,
        task,
    })
}
