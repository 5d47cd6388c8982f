//! Local HTTP + WebSocket service.
//!
//! - `POST /api/normal`, `POST /api/secure`: one JSON request, one JSON
//!   response.
//! - `GET /ws/normal`, `GET /ws/secure`: event stream of that channel; text
//!   messages sent by the client are handled as requests and answered
//!   in-line.

use std::net::SocketAddr;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::sync::broadcast;

use crate::device::Device;
use crate::schema::{Response, SecureEvent};

#[derive(Clone, Copy)]
enum Endpoint {
    Normal,
    Secure,
}

async fn handle(dev: Device, ep: Endpoint, body: String) -> Response {
    tokio::task::spawn_blocking(move || match ep {
        Endpoint::Normal => dev.handle_normal_raw(&body),
        Endpoint::Secure => dev.handle_secure_raw(&body),
    })
    .await
    .unwrap_or_else(|_| Response::err("internal"))
}

async fn api_normal(State(dev): State<Device>, body: String) -> Json<Response> {
    Json(handle(dev, Endpoint::Normal, body).await)
}

async fn api_secure(State(dev): State<Device>, body: String) -> Json<Response> {
    Json(handle(dev, Endpoint::Secure, body).await)
}

async fn ws_normal(State(dev): State<Device>, ws: WebSocketUpgrade) -> impl IntoResponse {
    let rx = dev.subscribe_normal();
    ws.on_upgrade(move |s| pump(s, dev, Endpoint::Normal, EventRx::Normal(rx)))
}

async fn ws_secure(State(dev): State<Device>, ws: WebSocketUpgrade) -> impl IntoResponse {
    let rx = dev.subscribe_secure();
    ws.on_upgrade(move |s| pump(s, dev, Endpoint::Secure, EventRx::Secure(rx)))
}

enum EventRx {
    Normal(broadcast::Receiver<crate::schema::NormalEvent>),
    Secure(broadcast::Receiver<SecureEvent>),
}

impl EventRx {
    async fn next(&mut self) -> Option<String> {
        loop {
            let r = match self {
                Self::Normal(rx) => rx.recv().await.map(|e| e.to_json()),
                Self::Secure(rx) => rx.recv().await.map(|e| e.to_json()),
            };
            match r {
                Ok(s) => return Some(s),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    }
}

async fn pump(mut socket: WebSocket, dev: Device, ep: Endpoint, mut events: EventRx) {
    loop {
        tokio::select! {
            ev = events.next() => {
                let Some(text) = ev else { break };
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let resp = handle(dev.clone(), ep, text).await;
                let out = serde_json::to_string(&resp).expect("serializable");
                if socket.send(Message::Text(out.into())).await.is_err() {
                    break;
                }
            }
        }
    }
}

pub fn router(dev: Device) -> Router {
    Router::new()
        .route("/api/normal", post(api_normal))
        .route("/api/secure", post(api_secure))
        .route("/ws/normal", get(ws_normal))
        .route("/ws/secure", get(ws_secure))
        .with_state(dev)
}

/// Binds `addr` and returns the bound address with the serving future.
pub async fn bind(
    dev: Device,
    addr: &str,
) -> std::io::Result<(
    SocketAddr,
    impl std::future::Future<Output = std::io::Result<()>>,
)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((
        local,
        async move { axum::serve(listener, router(dev)).await },
    ))
}
