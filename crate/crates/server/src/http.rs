//! HTTP and WebSocket endpoints.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Query as QueryParams, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use streammap_core::ingest::Query;

use crate::hub::{Hub, HubError, Instance};
use crate::ingest::{parse_ndjson, IngestOutcome};

/// Longest wait for an instance's first frame on `/frames/latest`.
const FIRST_FRAME_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Deserialize)]
struct KeywordParams {
    #[serde(default)]
    q: String,
}

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/frames/latest", get(latest_frame))
        .route("/ingest", post(ingest))
        .route("/stream", get(stream))
        .with_state(hub)
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, msg.into()).into_response()
}

fn resolve(hub: &Hub, raw: &str) -> Result<Arc<Instance>, Response> {
    let query = Query::parse(raw).map_err(|e| error(StatusCode::BAD_REQUEST, e.to_string()))?;
    hub.instance(&query).map_err(|e| match e {
        HubError::TooManyQueries(_) => error(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
    })
}

async fn latest_frame(State(hub): State<Arc<Hub>>, QueryParams(params): QueryParams<KeywordParams>) -> Response {
    let inst = match resolve(&hub, &params.q) {
        Ok(i) => i,
        Err(r) => return r,
    };
    match inst.wait_latest(FIRST_FRAME_TIMEOUT).await {
        Some(p) => ([(header::CONTENT_TYPE, "application/json")], p.json.as_str().to_owned()).into_response(),
        None => error(StatusCode::SERVICE_UNAVAILABLE, "no frame available yet"),
    }
}

async fn ingest(State(hub): State<Arc<Hub>>, body: String) -> Response {
    let (messages, malformed) = parse_ndjson(&body);
    match hub.ingest().submit(messages).await {
        Ok(outcome) => Json(IngestOutcome { malformed, ..outcome }).into_response(),
        Err(e) => error(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
    }
}

async fn stream(
    State(hub): State<Arc<Hub>>,
    QueryParams(params): QueryParams<KeywordParams>,
    ws: WebSocketUpgrade,
) -> Response {
    match resolve(&hub, &params.q) {
        Ok(inst) => ws.on_upgrade(move |socket| push_frames(socket, inst)),
        Err(r) => r,
    }
}

async fn push_frames(socket: WebSocket, inst: Arc<Instance>) {
    let mut sub = inst.subscribe();
    let (mut tx, mut rx) = socket.split();
    loop {
        tokio::select! {
            frame = sub.next() => {
                let Some(frame) = frame else { break };
                if tx.send(WsMessage::Text(frame.json)).await.is_err() {
                    break;
                }
            }
            incoming = rx.next() => match incoming {
                // client messages carry nothing; only closing matters
                Some(Ok(WsMessage::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = tx.close().await;
}
