//! UDP side: control intake and state broadcast.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use mrdaw_core::osc::{decode, encode, snapshot_messages, Downstream, RouteError, Upstream};
use mrdaw_core::{EventKind, Snapshot};
use tokio::net::UdpSocket;
use tokio::sync::watch;
use tracing::{debug, warn};

use crate::control::{Counters, Inbound};
use crate::registry::ClientKind;
use crate::Shared;

async fn reply_debug(socket: &UdpSocket, to: SocketAddr, text: String) {
    if let Ok(bytes) = encode(&Downstream::Debug(text).to_message()) {
        let _ = socket.send_to(&bytes, to).await;
    }
}

/// Handles one datagram. Never fails: bad input is counted and answered
/// with a `/mrdaw/debug` message.
pub async fn handle_datagram(bytes: &[u8], from: SocketAddr, socket: &UdpSocket, shared: &Shared) {
    let msg = match decode(bytes) {
        Ok(msg) => msg,
        Err(err) => {
            Counters::bump(&shared.counters.malformed);
            debug!(%from, %err, "malformed datagram");
            reply_debug(socket, from, format!("malformed packet: {err}")).await;
            return;
        }
    };
    let upstream = match Upstream::from_message(&msg) {
        Ok(up) => up,
        Err(err) => {
            let counter = match err {
                RouteError::UnknownAddress(_) => &shared.counters.unknown_address,
                RouteError::BadArguments { .. } => &shared.counters.malformed,
            };
            Counters::bump(counter);
            debug!(%from, %err, "unroutable message");
            reply_debug(socket, from, err.to_string()).await;
            return;
        }
    };
    let user = upstream.user();
    if shared.session.user_index(user).is_none() {
        Counters::bump(&shared.counters.rejected);
        reply_debug(socket, from, format!("unknown user {}", user.0)).await;
        return;
    }
    shared.registry.touch(user, ClientKind::Osc, from, Instant::now());
    let (kind, client_ms) = match upstream {
        Upstream::Hello { name, .. } => {
            debug!(%from, %user, %name, "hello");
            return;
        }
        Upstream::Record { client_ms, .. } => (EventKind::RecordToggle, client_ms.map(i64::from)),
        Upstream::Play { .. } => (EventKind::PlayAll, None),
        Upstream::Stop { .. } => (EventKind::StopAll, None),
        Upstream::Toggle { track, .. } => (EventKind::TrackToggle(track), None),
    };
    let _ = shared.control.send(Inbound::Event { user, kind, client_ms });
}

pub async fn intake(socket: Arc<UdpSocket>, shared: Arc<Shared>) {
    let mut buf = vec![0u8; 65_536];
    loop {
        match socket.recv_from(&mut buf).await {
            Ok((n, from)) => handle_datagram(&buf[..n], from, &socket, &shared).await,
            // ICMP errors from earlier sends surface here on some platforms.
            Err(err) => debug!(%err, "control socket receive error"),
        }
    }
}

/// Sends every published snapshot to every registered OSC client, from the
/// broadcast socket to the address the client sends from.
pub async fn broadcast(socket: UdpSocket, mut snapshots: watch::Receiver<Snapshot>, shared: Arc<Shared>) {
    while snapshots.changed().await.is_ok() {
        let snapshot = snapshots.borrow_and_update().clone();
        let dropped = shared.registry.prune(Instant::now());
        if dropped > 0 {
            debug!(dropped, "dropped stale clients");
        }
        let targets = shared.registry.osc_targets();
        if targets.is_empty() {
            continue;
        }
        let packets: Vec<Vec<u8>> = snapshot_messages(&snapshot.view).iter().filter_map(|m| encode(m).ok()).collect();
        for target in targets {
            for packet in &packets {
                if let Err(err) = socket.send_to(packet, target).await {
                    warn!(%target, %err, "broadcast send failed");
                    break;
                }
            }
        }
    }
}
