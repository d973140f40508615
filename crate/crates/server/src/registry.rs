use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use mrdaw_core::UserId;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    Osc,
    Websocket,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientEntry {
    pub addr: SocketAddr,
    pub last_seen: Instant,
}

/// Known clients, at most one per (user, kind). A newer address for the
/// same pair replaces the older one.
#[derive(Debug)]
pub struct ClientRegistry {
    timeout: Duration,
    clients: Mutex<BTreeMap<(UserId, ClientKind), ClientEntry>>,
}

impl ClientRegistry {
    pub fn new(timeout: Duration) -> Self {
        ClientRegistry { timeout, clients: Mutex::new(BTreeMap::new()) }
    }

    pub fn touch(&self, user: UserId, kind: ClientKind, addr: SocketAddr, now: Instant) {
        self.lock().insert((user, kind), ClientEntry { addr, last_seen: now });
    }

    pub fn remove(&self, user: UserId, kind: ClientKind, addr: SocketAddr) {
        let mut clients = self.lock();
        if clients.get(&(user, kind)).is_some_and(|e| e.addr == addr) {
            clients.remove(&(user, kind));
        }
    }

    /// Drops clients not heard from within the timeout. Returns how many.
    pub fn prune(&self, now: Instant) -> usize {
        let mut clients = self.lock();
        let before = clients.len();
        clients.retain(|_, e| now.saturating_duration_since(e.last_seen) < self.timeout);
        before - clients.len()
    }

    pub fn osc_targets(&self) -> Vec<SocketAddr> {
        self.lock().iter().filter(|((_, k), _)| *k == ClientKind::Osc).map(|(_, e)| e.addr).collect()
    }

    pub fn entries(&self) -> Vec<(UserId, ClientKind, ClientEntry)> {
        self.lock().iter().map(|(&(u, k), e)| (u, k, e.clone())).collect()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BTreeMap<(UserId, ClientKind), ClientEntry>> {
        self.clients.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(port: u16) -> SocketAddr {
        SocketAddr::from(([127, 0, 0, 1], port))
    }

    #[test]
    fn one_entry_per_user_and_kind() {
        let reg = ClientRegistry::new(Duration::from_secs(10));
        let t0 = Instant::now();
        reg.touch(UserId(1), ClientKind::Osc, addr(1000), t0);
        reg.touch(UserId(1), ClientKind::Osc, addr(1001), t0);
        reg.touch(UserId(1), ClientKind::Websocket, addr(1002), t0);
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.osc_targets(), vec![addr(1001)]);
    }

    #[test]
    fn stale_clients_are_dropped() {
        let reg = ClientRegistry::new(Duration::from_secs(10));
        let t0 = Instant::now();
        reg.touch(UserId(1), ClientKind::Osc, addr(1000), t0);
        reg.touch(UserId(2), ClientKind::Osc, addr(1001), t0 + Duration::from_secs(5));
        assert_eq!(reg.prune(t0 + Duration::from_secs(9)), 0);
        assert_eq!(reg.prune(t0 + Duration::from_secs(10)), 1);
        assert_eq!(reg.osc_targets(), vec![addr(1001)]);
    }

    #[test]
    fn removal_needs_the_current_address() {
        let reg = ClientRegistry::new(Duration::from_secs(10));
        reg.touch(UserId(1), ClientKind::Websocket, addr(5), Instant::now());
        reg.remove(UserId(1), ClientKind::Websocket, addr(6));
        assert_eq!(reg.len(), 1);
        reg.remove(UserId(1), ClientKind::Websocket, addr(5));
        assert!(reg.is_empty());
    }
}
