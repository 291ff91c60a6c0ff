use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use crate::error::Result;
use crate::session::{Outbound, Session, SessionConfig};

pub const DEFAULT_WS_PORT: u16 = 9870;
pub const DEFAULT_HTTP_PORT: u16 = 9871;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub ws_port: u16,
    /// Static viewer bundle; `None` disables the HTTP listener.
    pub http_port: Option<u16>,
    pub static_dir: PathBuf,
    pub session: SessionConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            ws_port: DEFAULT_WS_PORT,
            http_port: Some(DEFAULT_HTTP_PORT),
            static_dir: default_static_dir(),
            session: SessionConfig::default(),
        }
    }
}

/// The viewer bundle shipped with this crate.
pub fn default_static_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("viewer")
}

/// WebSocket endpoint, served at `/` and `/ws`.
pub fn ws_router(config: SessionConfig) -> Router {
    Router::new().route("/", get(upgrade)).route("/ws", get(upgrade)).with_state(Arc::new(config))
}

pub fn static_router(dir: PathBuf) -> Router {
    Router::new().fallback(get(static_file)).with_state(Arc::new(dir))
}

async fn static_file(State(root): State<Arc<PathBuf>>, uri: Uri) -> Response {
    let mut path = (*root).clone();
    for part in uri.path().split('/') {
        match part {
            "" | "." => {}
            ".." => return StatusCode::NOT_FOUND.into_response(),
            p if p.contains('\\') => return StatusCode::NOT_FOUND.into_response(),
            p => path.push(p),
        }
    }
    if path.is_dir() {
        path.push("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let mime = mime_guess::from_path(&path).first_or_octet_stream();
            ([(header::CONTENT_TYPE, mime.to_string())], bytes).into_response()
        }
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(config): State<Arc<SessionConfig>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, (*config).clone()))
}

async fn run_session(socket: WebSocket, config: SessionConfig) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel();
    let session = Session::new(config, tx);
    let worker = tokio::spawn(Arc::clone(&session).run_worker());
    let writer = tokio::spawn(async move {
        while let Some(out) = rx.recv().await {
            let msg = match out {
                Outbound::Text(t) => Message::Text(t.into()),
                Outbound::Binary(b) => Message::Binary(b.into()),
            };
            if sink.send(msg).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(t) => session.handle_text(t.as_str()),
            Message::Close(_) => break,
            Message::Binary(_) => session.reject("binary messages are not accepted"),
            _ => {}
        }
    }
    worker.abort();
    drop(session);
    writer.abort();
}

/// Listeners bound but not yet serving; lets callers learn ephemeral ports.
pub struct Bound {
    ws: TcpListener,
    http: Option<TcpListener>,
    config: ServiceConfig,
}

impl Bound {
    pub fn ws_addr(&self) -> SocketAddr {
        self.ws.local_addr().expect("bound listener has an address")
    }

    pub fn http_addr(&self) -> Option<SocketAddr> {
        self.http.as_ref().and_then(|l| l.local_addr().ok())
    }

    pub async fn serve(self) -> Result<()> {
        let ws = axum::serve(self.ws, ws_router(self.config.session.clone()));
        match self.http {
            Some(http) => {
                let files = axum::serve(http, static_router(self.config.static_dir.clone()));
                tokio::try_join!(async { ws.await }, async { files.await })?;
            }
            None => ws.await?,
        }
        Ok(())
    }
}

pub async fn bind(config: ServiceConfig) -> Result<Bound> {
    let ws = TcpListener::bind((config.bind, config.ws_port)).await?;
    let http = match config.http_port {
        Some(p) => Some(TcpListener::bind((config.bind, p)).await?),
        None => None,
    };
    Ok(Bound { ws, http, config })
}

pub async fn serve(config: ServiceConfig) -> Result<()> {
    let bound = bind(config).await?;
    log::info!("websocket on ws://{}", bound.ws_addr());
    if let Some(a) = bound.http_addr() {
        log::info!("viewer on http://{a}");
    }
    bound.serve().await
}
