//! The control plane: the only writer of session state.
//!
//! One thread owns the [`SessionHost`]. Every audio block it drains queued
//! events, stamps them with the session clock, applies and dispatches them,
//! mixes one block and publishes a snapshot when the view changed or the
//! broadcast interval ran out.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use mrdaw_core::synth::Sawtooth;
use mrdaw_core::wav::{export_session, ExportError};
use mrdaw_core::{EventKind, SessionHost, Snapshot, UserId};
use serde::Serialize;
use tokio::sync::{oneshot, watch};
use tracing::{debug, info, warn};

pub enum Inbound {
    Event { user: UserId, kind: EventKind, client_ms: Option<i64> },
    Export { dir: PathBuf, prefix: String, reply: oneshot::Sender<Result<Vec<PathBuf>, ExportError>> },
    Shutdown,
}

#[derive(Debug, Default)]
pub struct Counters {
    pub malformed: AtomicU64,
    pub unknown_address: AtomicU64,
    pub rejected: AtomicU64,
    pub applied: AtomicU64,
    pub broadcasts: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CounterValues {
    pub malformed: u64,
    pub unknown_address: u64,
    pub rejected: u64,
    pub applied: u64,
    pub broadcasts: u64,
}

impl Counters {
    pub fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn values(&self) -> CounterValues {
        CounterValues {
            malformed: self.malformed.load(Ordering::Relaxed),
            unknown_address: self.unknown_address.load(Ordering::Relaxed),
            rejected: self.rejected.load(Ordering::Relaxed),
            applied: self.applied.load(Ordering::Relaxed),
            broadcasts: self.broadcasts.load(Ordering::Relaxed),
        }
    }
}

pub struct ControlLoop {
    pub host: SessionHost,
    pub inbound: Receiver<Inbound>,
    pub snapshots: watch::Sender<Snapshot>,
    pub counters: Arc<Counters>,
    pub broadcast_interval: Duration,
    pub synthetic_input: bool,
}

impl ControlLoop {
    /// Runs until [`Inbound::Shutdown`] or until every sender is gone, then
    /// hands the host back.
    pub fn spawn(self) -> std::io::Result<JoinHandle<SessionHost>> {
        std::thread::Builder::new().name("mrdaw-control".into()).spawn(move || self.run())
    }

    fn run(mut self) -> SessionHost {
        let config = self.host.state().config().clone();
        let block = config.block_size;
        let tick = Duration::from_secs_f64(block as f64 / config.sample_rate as f64);
        let mut seq = self.snapshots.borrow().seq;
        let mut published = self.host.view();
        let mut last_publish = Instant::now();
        let mut next_tick = Instant::now() + tick;
        let mut pending = Vec::new();
        let silence = vec![0.0f32; block];

        'running: loop {
            loop {
                let now = Instant::now();
                if now >= next_tick {
                    break;
                }
                match self.inbound.recv_timeout(next_tick - now) {
                    Ok(msg) => pending.push(msg),
                    Err(RecvTimeoutError::Timeout) => break,
                    Err(RecvTimeoutError::Disconnected) => break 'running,
                }
            }
            while let Ok(msg) = self.inbound.try_recv() {
                pending.push(msg);
            }
            for msg in pending.drain(..) {
                match msg {
                    Inbound::Event { user, kind, client_ms } => self.apply(user, kind, client_ms),
                    Inbound::Export { dir, prefix, reply } => {
                        let result = export_session(self.host.state(), self.host.loops(), &dir, &prefix);
                        let _ = reply.send(result);
                    }
                    Inbound::Shutdown => break 'running,
                }
            }

            let live: Vec<Vec<f32>> = if self.synthetic_input {
                let now = self.host.now();
                (0..config.num_users).map(|u| Sawtooth::for_user(u).render(now, block)).collect()
            } else {
                vec![silence.clone(); config.num_users]
            };
            let refs: Vec<&[f32]> = live.iter().map(Vec::as_slice).collect();
            self.host.advance(&refs, block);

            let view = self.host.view();
            if view != published || last_publish.elapsed() >= self.broadcast_interval {
                seq += 1;
                self.snapshots.send_replace(Snapshot { seq, view: view.clone() });
                Counters::bump(&self.counters.broadcasts);
                published = view;
                last_publish = Instant::now();
            }

            next_tick += tick;
            let now = Instant::now();
            if now > next_tick + Duration::from_millis(250) {
                warn!(behind_ms = (now - next_tick).as_millis() as u64, "control loop fell behind; skipping ahead");
                next_tick = now;
            }
        }
        info!(at_sample = self.host.now(), "control loop stopped");
        self.host
    }

    fn apply(&mut self, user: UserId, kind: EventKind, client_ms: Option<i64>) {
        let sr = self.host.state().config().sample_rate as i64;
        let client_t = client_ms.filter(|ms| *ms >= 0).map(|ms| (ms * sr / 1000) as u64);
        match self.host.submit_with_client_time(user, kind, client_t) {
            Ok(report) => {
                Counters::bump(&self.counters.applied);
                debug!(%user, ?kind, at = self.host.now(), calls = report.dispatch.calls.len(), "applied");
                for (call, err) in &report.dispatch.failures {
                    warn!(%call, %err, "backend call failed");
                }
            }
            Err(err) => {
                Counters::bump(&self.counters.rejected);
                debug!(%user, ?kind, %err, "rejected");
            }
        }
    }
}
