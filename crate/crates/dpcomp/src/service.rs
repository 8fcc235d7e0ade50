//! Stateless JSON service over the same request types as the CLI.
//!
//! Computations run on the blocking thread pool behind a semaphore, so at
//! most `workers` requests hold knapsack rows or subset tables at a time.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::sync::Semaphore;

use crate::allocate::{allocate_budget, AllocationRequest};
use crate::api::{compose, ComposeRequest, Settings};
use crate::curve::{curve, CurveRequest};
use crate::error::ApiError;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub settings: Settings,
    /// Concurrent computations allowed.
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            settings: Settings::default(),
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
        }
    }
}

struct AppState {
    settings: Settings,
    permits: Semaphore,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

pub fn router(config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        settings: config.settings,
        permits: Semaphore::new(config.workers.max(1)),
    });
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/compose", post(compose_handler))
        .route("/v1/allocate", post(allocate_handler))
        .route("/v1/curve", get(curve_handler))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    axum::serve(listener, router(config)).await
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
    })
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed request: {e}")))
}

/// Runs `job` on the blocking pool once a worker permit is free.
async fn run<T, F>(state: &AppState, job: F) -> Result<T, ApiError>
where
    F: FnOnce(&Settings) -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    let _permit = state
        .permits
        .acquire()
        .await
        .map_err(|_| ApiError::BadRequest("service is shutting down".into()))?;
    let settings = state.settings;
    tokio::task::spawn_blocking(move || job(&settings))
        .await
        .map_err(|e| ApiError::BadRequest(format!("computation aborted: {e}")))?
}

async fn compose_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let result = async {
        let req: ComposeRequest = parse_body(&body)?;
        run(&state, move |s| compose(&req, s)).await
    };
    match result.await {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn allocate_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let result = async {
        let req: AllocationRequest = parse_body(&body)?;
        run(&state, move |s| allocate_budget(&req, s)).await
    };
    match result.await {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn curve_handler(
    State(state): State<Arc<AppState>>,
    query: Result<Query<CurveRequest>, QueryRejection>,
) -> Response {
    let result = async {
        let Query(req) = query.map_err(|e| ApiError::BadRequest(format!("malformed query: {}", e.body_text())))?;
        run(&state, move |s| curve(&req, s)).await
    };
    match result.await {
        Ok(rows) => Json(rows).into_response(),
        Err(e) => e.into_response(),
    }
}
