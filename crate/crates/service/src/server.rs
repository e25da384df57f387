//! HTTP side: `/ws` sessions, `/healthz`, and the static UI mount at `/`.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use denom_core::config::Config;
use denom_core::pipeline::Detector;
use futures_util::{SinkExt, StreamExt};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tower_http::services::ServeDir;

use crate::protocol::{parse_client_message, ClientMessage, ErrorCode, ServerMessage};
use crate::session::{take_next, Session};

/// Shared by every connection; nothing in here is mutated after startup.
pub struct AppState {
    pub detector: Arc<Detector>,
    pub config: Config,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new(config: Config, detector: Detector) -> Arc<Self> {
        Arc::new(AppState { detector: Arc::new(detector), config, next_session: AtomicU64::new(1) })
    }

    pub fn from_config(config: Config) -> denom_core::Result<Arc<Self>> {
        let detector = Detector::from_config(&config)?;
        Ok(Self::new(config, detector))
    }

    fn new_session(&self) -> Session {
        Session::new(
            self.next_session.fetch_add(1, Ordering::Relaxed),
            self.detector.clone(),
            self.config.assist.clone(),
            self.config.speech.clone(),
            self.config.server.max_frame_bytes,
        )
    }
}

const PLACEHOLDER_INDEX: &str = "<!doctype html><title>denom</title>\
<p>No UI bundle configured. Set <code>server.static_dir</code> to serve one; the socket is at <code>/ws</code>.</p>";

pub fn router(state: Arc<AppState>) -> Router {
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }));
    let app = match &state.config.server.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    };
    app.with_state(state)
}

pub async fn serve(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> impl IntoResponse {
    // leave room for base64 and the JSON envelope so oversize frames get a reply
    let limit = state.config.server.max_frame_bytes * 2 + (1 << 20);
    ws.max_message_size(limit).max_frame_size(limit).on_upgrade(move |socket| run_session(socket, state))
}

enum Inbound {
    Message(ClientMessage),
    Invalid(ServerMessage),
}

async fn run_session(socket: WebSocket, state: Arc<AppState>) {
    let mut session = state.new_session();
    let id = session.id;
    log::info!("session {id} opened");
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<ServerMessage>();
    let (in_tx, mut in_rx) = mpsc::unbounded_channel::<Inbound>();

    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            if sink.send(Message::Text(msg.to_json())).await.is_err() {
                break;
            }
        }
    });

    let _ = out_tx.send(session.greeting());
    // One blocking worker per session keeps slow frames off the async threads.
    let worker_out = out_tx.clone();
    let worker = tokio::task::spawn_blocking(move || {
        let mut pending: VecDeque<ClientMessage> = VecDeque::new();
        loop {
            if pending.is_empty() {
                match in_rx.blocking_recv() {
                    Some(item) => queue(item, &mut pending, &worker_out),
                    None => break,
                }
            }
            while let Ok(item) = in_rx.try_recv() {
                queue(item, &mut pending, &worker_out);
            }
            let mut dropped = Vec::new();
            let next = take_next(&mut pending, &mut dropped);
            for d in dropped {
                let _ = worker_out.send(d);
            }
            if let Some(msg) = next {
                for reply in session.handle(msg) {
                    let _ = worker_out.send(reply);
                }
            }
        }
        session
    });

    while let Some(Ok(msg)) = stream.next().await {
        let item = match msg {
            Message::Text(text) => match parse_client_message(&text) {
                Ok(m) => Inbound::Message(m),
                Err(e) => Inbound::Invalid(e),
            },
            Message::Binary(_) => {
                Inbound::Invalid(ServerMessage::error(ErrorCode::BadMessage, "binary messages are not supported", None))
            }
            Message::Close(_) => break,
            _ => continue,
        };
        if in_tx.send(item).is_err() {
            break;
        }
    }
    drop(in_tx);
    if let Ok(session) = worker.await {
        let mean = session.timings.mean();
        log::info!(
            "session {id} closed after {} frames, mean pre {:.1} ms inf {:.1} ms post {:.1} ms",
            session.timings.frames,
            mean.pre,
            mean.inf,
            mean.post
        );
    }
    drop(out_tx);
    let _ = writer.await;
}

/// Invalid input is answered at once; it never touches session state.
fn queue(item: Inbound, pending: &mut VecDeque<ClientMessage>, out: &mpsc::UnboundedSender<ServerMessage>) {
    match item {
        Inbound::Message(m) => pending.push_back(m),
        Inbound::Invalid(e) => {
            let _ = out.send(e);
        }
    }
}
