//! WebSocket bridge at `/panel` and the static HTTP root.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{ConnectInfo, State};
use axum::http::StatusCode;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use mrdaw_core::{Snapshot, UserId};
use tokio::sync::watch;
use tower_http::services::ServeDir;
use tracing::debug;

use crate::control::{Counters, Inbound};
use crate::panel::{event_kind, PanelMessage};
use crate::registry::ClientKind;
use crate::Shared;

#[derive(Clone)]
struct App {
    shared: Arc<Shared>,
    snapshots: watch::Receiver<Snapshot>,
}

pub fn router(shared: Arc<Shared>, snapshots: watch::Receiver<Snapshot>, static_dir: Option<PathBuf>) -> Router {
    let app = App { shared, snapshots };
    let router = Router::new().route("/panel", get(upgrade)).with_state(app);
    match static_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.fallback(|| async { (StatusCode::NOT_FOUND, "no static root configured\n") }),
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(app): State<App>, ConnectInfo(peer): ConnectInfo<SocketAddr>) -> Response {
    ws.on_upgrade(move |socket| session(socket, app, peer))
}

/// Applies one text frame. Returns a reply for the panel, if any.
fn handle_text(text: &str, peer: SocketAddr, shared: &Shared, me: &mut Option<UserId>) -> Option<PanelMessage> {
    let msg: PanelMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(err) => {
            Counters::bump(&shared.counters.malformed);
            return Some(PanelMessage::error(format!("invalid message: {err}")));
        }
    };
    let known = |user: u32| shared.session.user_index(UserId(user)).is_some();
    match msg {
        PanelMessage::Hello { user } if known(user) => {
            shared.registry.touch(UserId(user), ClientKind::Websocket, peer, Instant::now());
            *me = Some(UserId(user));
            None
        }
        PanelMessage::Event { user, event, track, t_ms } if known(user) => {
            shared.registry.touch(UserId(user), ClientKind::Websocket, peer, Instant::now());
            match event_kind(event, track) {
                Ok(kind) => {
                    let _ = shared.control.send(Inbound::Event { user: UserId(user), kind, client_ms: t_ms });
                    None
                }
                Err(reason) => {
                    Counters::bump(&shared.counters.malformed);
                    Some(PanelMessage::error(reason))
                }
            }
        }
        PanelMessage::Hello { user } | PanelMessage::Event { user, .. } => {
            Counters::bump(&shared.counters.rejected);
            Some(PanelMessage::error(format!("unknown user {user}")))
        }
        PanelMessage::State(_) | PanelMessage::Error { .. } => {
            Counters::bump(&shared.counters.malformed);
            Some(PanelMessage::error("panels may only send hello and event"))
        }
    }
}

async fn session(socket: WebSocket, app: App, peer: SocketAddr) {
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = app.snapshots.clone();
    snapshots.mark_changed();
    let mut me: Option<UserId> = None;
    debug!(%peer, "panel connected");
    loop {
        tokio::select! {
            changed = snapshots.changed() => {
                if changed.is_err() {
                    break;
                }
                let snapshot = snapshots.borrow_and_update().clone();
                let text = PanelMessage::State(snapshot).to_json();
                if sink.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            incoming = stream.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                if let Some(reply) = handle_text(text.as_str(), peer, &app.shared, &mut me) {
                    if sink.send(Message::Text(reply.to_json().into())).await.is_err() {
                        break;
                    }
                }
            }
        }
    }
    if let Some(user) = me {
        app.shared.registry.remove(user, ClientKind::Websocket, peer);
    }
    debug!(%peer, "panel disconnected");
}
