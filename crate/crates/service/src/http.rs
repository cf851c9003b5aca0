//! HTTP and WebSocket routes.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use hydrodiag_core::error::from_json;
use hydrodiag_core::{DetectionMode, Scenario};

use crate::engine::{SessionCommand, TelemetryFrame};
use crate::host::{HostError, SessionHost};

pub const DEFAULT_PORT: u16 = 8700;

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<HostError> for ApiError {
    fn from(e: HostError) -> Self {
        let status = match e {
            HostError::UnknownSession(_) => StatusCode::NOT_FOUND,
            HostError::Full(_) | HostError::Stopped(_) => StatusCode::SERVICE_UNAVAILABLE,
            HostError::Invalid(_) => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

fn bad_request(e: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, e.to_string())
}

#[derive(Debug, Default, Deserialize)]
struct StartQuery {
    mode: Option<String>,
    speed: Option<f64>,
}

pub fn router(host: SessionHost) -> Router {
    Router::new()
        .route("/session", post(start))
        .route("/session/{id}", axum::routing::delete(stop))
        .route("/session/{id}/command", post(command))
        .route("/session/{id}/state", get(state))
        .route("/session/{id}/log", get(log))
        .route("/session/{id}/telemetry", get(telemetry))
        .with_state(host)
}

async fn start(
    State(host): State<SessionHost>,
    Query(q): Query<StartQuery>,
    body: String,
) -> Result<Json<serde_json::Value>, ApiError> {
    let scenario: Scenario = from_json(&body).map_err(bad_request)?;
    let mode = match q.mode.as_deref() {
        None => DetectionMode::Hybrid,
        Some(m) => m.parse().map_err(bad_request)?,
    };
    let id = host.start(scenario, mode, q.speed.unwrap_or(1.0)).await?;
    Ok(Json(json!({ "id": id })))
}

async fn command(
    State(host): State<SessionHost>,
    Path(id): Path<u64>,
    body: String,
) -> Result<impl IntoResponse, ApiError> {
    let cmd: SessionCommand = from_json(&body).map_err(bad_request)?;
    Ok(Json(host.command(id, cmd).await?))
}

async fn state(State(host): State<SessionHost>, Path(id): Path<u64>) -> Result<Json<TelemetryFrame>, ApiError> {
    Ok(Json(host.latest(id)?))
}

async fn log(State(host): State<SessionHost>, Path(id): Path<u64>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(host.record(id).await?))
}

async fn stop(State(host): State<SessionHost>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    host.stop(id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn telemetry(
    State(host): State<SessionHost>,
    Path(id): Path<u64>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let (latest, frames) = host.subscribe(id)?;
    let first = latest.borrow().clone();
    Ok(ws.on_upgrade(move |socket| stream(socket, first, frames)))
}

async fn send(socket: &mut WebSocket, frame: &TelemetryFrame) -> bool {
    let Ok(text) = serde_json::to_string(frame) else {
        return false;
    };
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Current state first, then the decimated stream. Frames never go backwards
/// for one consumer; a lagging consumer skips ahead.
async fn stream(
    mut socket: WebSocket,
    first: TelemetryFrame,
    mut frames: tokio::sync::broadcast::Receiver<Arc<TelemetryFrame>>,
) {
    let mut last = first.tick;
    if !send(&mut socket, &first).await {
        return;
    }
    loop {
        tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                _ => {}
            },
            frame = frames.recv() => match frame {
                Ok(f) => {
                    if f.tick <= last {
                        continue;
                    }
                    last = f.tick;
                    if !send(&mut socket, &f).await {
                        return;
                    }
                }
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return,
            },
        }
    }
}

/// Serves on `0.0.0.0:$HYDRODIAG_PORT` (8700 if unset) until the process ends.
pub async fn serve(host: SessionHost) -> std::io::Result<()> {
    let port = match std::env::var("HYDRODIAG_PORT") {
        Ok(p) => p
            .parse()
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad HYDRODIAG_PORT `{p}`")))?,
        Err(_) => DEFAULT_PORT,
    };
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port))).await?;
    axum::serve(listener, router(host)).await
}
