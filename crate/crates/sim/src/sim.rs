//! Discrete-event replay of a trace through clients, a lossy network and
//! the server, on a virtual sample clock.
//!
//! Clients send each pedal press as a numbered control datagram and resend
//! it until acknowledged. The server applies presses per client in sequence
//! order at arrival time, then pushes a full numbered snapshot to every
//! client on change and otherwise every broadcast interval. Every datagram
//! goes out `redundancy` times so a single loss does not cost a round trip.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use mrdaw_core::synth::Sawtooth;
use mrdaw_core::{EffectCommand, SessionConfig, SessionHost, SessionView, Snapshot};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::invariants::check_invariants;
use crate::latency::{ms_to_samples, LatencyModel, ModelError, Network};
use crate::report::{ClientReport, Finalized, LoopReport, NetStats, Outcome, SimReport, SimSettings, Step};
use crate::trace::TraceEvent;

pub const BROADCAST_INTERVAL_MS: f64 = 50.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub session: SessionConfig,
    pub redundancy: u32,
    pub broadcast_interval_ms: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { session: SessionConfig::default(), redundancy: 8, broadcast_interval_ms: BROADCAST_INTERVAL_MS }
    }
}

impl SimConfig {
    pub fn new(users: usize, tracks_per_user: usize) -> Self {
        SimConfig { session: SessionConfig::new(users, tracks_per_user), ..Self::default() }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trace event {index} names user {user}, but the session has {users} users")]
    UnknownUser { index: usize, user: u32, users: usize },
    #[error("redundancy must be at least 1")]
    NoRedundancy,
    #[error("broadcast interval must be positive")]
    Interval,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] mrdaw_core::session::ConfigError),
}

/// Closed-form convergence bound in samples: worst delay out, one broadcast
/// interval, worst delay back.
pub fn convergence_bound(model: &LatencyModel, sample_rate: u32, interval_ms: f64) -> u64 {
    2 * model.max_delay(sample_rate) + ms_to_samples(interval_ms, sample_rate)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Control {
    slot: usize,
    seq: u64,
    trace_index: usize,
    pressed_at: u64,
}

#[derive(Clone, Debug)]
enum Ev {
    Press(usize),
    ToServer(Control),
    Ack { slot: usize, upto: u64 },
    Resend { slot: usize, seq: u64 },
    ToClient { slot: usize, snapshot: Snapshot },
    Tick { generation: u64 },
}

struct Scheduled {
    time: u64,
    order: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.order) == (other.time, other.order)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // Min-heap on (time, order).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.order).cmp(&(self.time, self.order))
    }
}

#[derive(Default)]
struct ClientSide {
    next_seq: u64,
    unacked: BTreeMap<u64, Control>,
    view: Option<Snapshot>,
    last_change: u64,
    received: u64,
}

#[derive(Default)]
struct Intake {
    expected: u64,
    pending: BTreeMap<u64, Control>,
}

/// Result of a run, with the server's final host for offline rendering.
pub struct SimOutcome {
    pub report: SimReport,
    pub host: SessionHost,
}

struct Sim<'a> {
    trace: &'a [TraceEvent],
    config: &'a SimConfig,
    net: Network,
    queue: BinaryHeap<Scheduled>,
    order: u64,
    now: u64,
    host: SessionHost,
    intake: Vec<Intake>,
    clients: Vec<ClientSide>,
    seq: u64,
    generation: u64,
    interval: u64,
    rto: u64,
    trajectory: Vec<Step>,
    stats: NetStats,
    hashers: Vec<Sha256>,
    max_abs: f32,
}

impl Sim<'_> {
    fn schedule(&mut self, time: u64, ev: Ev) {
        self.order += 1;
        self.queue.push(Scheduled { time, order: self.order, ev });
    }

    fn send(&mut self, ev: Ev) {
        for _ in 0..self.config.redundancy {
            if let Some(delay) = self.net.transit() {
                self.schedule(self.now + delay, ev.clone());
            }
        }
    }

    fn advance_audio(&mut self, to: u64) {
        const CHUNK: u64 = 1 << 15;
        while self.host.now() < to {
            let start = self.host.now();
            let frames = (to - start).min(CHUNK) as usize;
            let live: Vec<Vec<f32>> =
                (0..self.config.session.num_users).map(|u| Sawtooth::for_user(u).render(start, frames)).collect();
            let refs: Vec<&[f32]> = live.iter().map(Vec::as_slice).collect();
            let rendered = self.host.advance(&refs, frames);
            for (hasher, out) in self.hashers.iter_mut().zip(&rendered.outputs) {
                for s in out {
                    hasher.update(s.to_le_bytes());
                    let a = if s.is_finite() { s.abs() } else { f32::INFINITY };
                    if a > self.max_abs {
                        self.max_abs = a;
                    }
                }
            }
        }
    }

    fn broadcast(&mut self) {
        self.seq += 1;
        self.stats.broadcasts += 1;
        let snapshot = Snapshot { seq: self.seq, view: self.host.view() };
        for slot in 0..self.clients.len() {
            self.send(Ev::ToClient { slot, snapshot: snapshot.clone() });
        }
        self.generation += 1;
        let generation = self.generation;
        self.schedule(self.now + self.interval, Ev::Tick { generation });
    }

    fn press(&mut self, index: usize) {
        let ev = &self.trace[index];
        let slot = ev.user as usize - 1;
        let client = &mut self.clients[slot];
        client.next_seq += 1;
        let control = Control { slot, seq: client.next_seq, trace_index: index, pressed_at: self.now };
        client.unacked.insert(control.seq, control);
        self.send(Ev::ToServer(control));
        self.schedule(self.now + self.rto, Ev::Resend { slot, seq: control.seq });
    }

    fn resend(&mut self, slot: usize, seq: u64) {
        if let Some(&control) = self.clients[slot].unacked.get(&seq) {
            self.stats.retransmissions += 1;
            self.send(Ev::ToServer(control));
            self.schedule(self.now + self.rto, Ev::Resend { slot, seq });
        }
    }

    fn receive_control(&mut self, control: Control) {
        let intake = &mut self.intake[control.slot];
        if control.seq <= intake.expected || intake.pending.contains_key(&control.seq) {
            self.stats.duplicates_dropped += 1;
        } else {
            intake.pending.insert(control.seq, control);
        }
        let mut ready = Vec::new();
        while let Some(next) = intake.pending.remove(&(intake.expected + 1)) {
            intake.expected += 1;
            ready.push(next);
        }
        let upto = intake.expected;
        let before = self.host.view();
        for control in ready {
            self.apply(control);
        }
        self.send(Ev::Ack { slot: control.slot, upto });
        if self.host.view() != before {
            self.broadcast();
        }
    }

    fn apply(&mut self, control: Control) {
        let ev = self.trace[control.trace_index];
        let user = ev.user_id();
        let result = self.host.submit_with_client_time(user, ev.kind(), Some(control.pressed_at));
        let (outcome, finalized, backend_errors) = match result {
            Ok(report) => {
                let finalized = report.effects.iter().find_map(|e| match *e {
                    EffectCommand::StopCaptureAndFinalize { track, .. } => {
                        let id = self.host.state().track(track).and_then(|t| t.content());
                        let len = id.and_then(|id| self.host.loops().get(id)).map_or(0, |b| b.len());
                        Some(Finalized { track, len })
                    }
                    _ => None,
                });
                let errors = report.dispatch.failures.iter().map(|(call, err)| format!("{call}: {err}")).collect();
                (Outcome::Applied, finalized, errors)
            }
            Err(err) => (Outcome::Rejected { reason: err.to_string() }, None, Vec::new()),
        };
        self.trajectory.push(Step {
            t: self.now,
            pressed_at: control.pressed_at,
            user,
            event: ev.event,
            track: ev.track,
            outcome,
            view: self.host.view(),
            finalized,
            backend_errors,
        });
    }

    fn receive_snapshot(&mut self, slot: usize, snapshot: Snapshot) {
        let client = &mut self.clients[slot];
        client.received += 1;
        let newer = client.view.as_ref().is_none_or(|v| snapshot.seq > v.seq);
        if !newer {
            return;
        }
        let changed = client.view.as_ref().is_none_or(|v| v.view != snapshot.view);
        if changed {
            client.last_change = self.now;
        }
        client.view = Some(snapshot);
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::Press(index) => self.press(index),
            Ev::ToServer(control) => self.receive_control(control),
            Ev::Ack { slot, upto } => {
                let client = &mut self.clients[slot];
                client.unacked.retain(|&seq, _| seq > upto);
            }
            Ev::Resend { slot, seq } => self.resend(slot, seq),
            Ev::ToClient { slot, snapshot } => self.receive_snapshot(slot, snapshot),
            Ev::Tick { generation } => {
                if generation == self.generation {
                    self.broadcast();
                }
            }
        }
    }
}

/// Runs a trace to completion. Pure in `(trace, model, config)`.
pub fn simulate(trace: &[TraceEvent], model: &LatencyModel, config: &SimConfig) -> Result<SimReport, SimError> {
    run(trace, model, config).map(|o| o.report)
}

pub fn run(trace: &[TraceEvent], model: &LatencyModel, config: &SimConfig) -> Result<SimOutcome, SimError> {
    model.validate()?;
    if config.redundancy == 0 {
        return Err(SimError::NoRedundancy);
    }
    if !(config.broadcast_interval_ms > 0.0) {
        return Err(SimError::Interval);
    }
    let users = config.session.num_users;
    for (index, ev) in trace.iter().enumerate() {
        if ev.user as usize > users || ev.user == 0 {
            return Err(SimError::UnknownUser { index, user: ev.user, users });
        }
    }
    let sr = config.session.sample_rate;
    let host = SessionHost::with_mock(config.session.clone())?;
    let interval = ms_to_samples(config.broadcast_interval_ms, sr).max(1);
    let max_delay = model.max_delay(sr);
    let bound = convergence_bound(model, sr, config.broadcast_interval_ms);
    let last_event = trace.last().map_or(0, |e| ms_to_samples(e.t_ms, sr));
    let horizon = last_event + ms_to_samples(2_000.0, sr).max(4 * bound);

    let mut sim = Sim {
        trace,
        config,
        net: Network::new(*model, sr),
        queue: BinaryHeap::new(),
        order: 0,
        now: 0,
        host,
        intake: (0..users).map(|_| Intake::default()).collect(),
        clients: (0..users).map(|_| ClientSide::default()).collect(),
        seq: 0,
        generation: 0,
        interval,
        rto: 2 * max_delay + ms_to_samples(10.0, sr).max(1),
        trajectory: Vec::new(),
        stats: NetStats::default(),
        hashers: (0..users).map(|_| Sha256::new()).collect(),
        max_abs: 0.0,
    };
    for (index, ev) in trace.iter().enumerate() {
        sim.schedule(ms_to_samples(ev.t_ms, sr), Ev::Press(index));
    }
    sim.broadcast();

    while let Some(item) = sim.queue.pop() {
        if item.time > horizon {
            break;
        }
        sim.advance_audio(item.time);
        sim.now = item.time;
        sim.handle(item.ev);
    }
    sim.advance_audio(horizon);
    sim.now = horizon;

    let final_view = sim.host.view();
    let final_snapshot = Snapshot { seq: sim.seq, view: final_view.clone() };
    let to_ms = |samples: u64| config.session.ms_from_samples(samples);
    let clients = sim
        .clients
        .iter()
        .enumerate()
        .map(|(slot, c)| {
            let converged = c.view.as_ref().is_some_and(|v| v.view == final_view);
            ClientReport {
                user: config.session.user_at(slot),
                snapshots_received: c.received,
                view: c.view.clone(),
                converged,
                convergence_ms: converged.then(|| to_ms(c.last_change.saturating_sub(last_event))),
            }
        })
        .collect();
    let loops = sim
        .host
        .state()
        .tracks()
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            let buffer = sim.host.loops().get(t.content()?)?;
            Some(LoopReport { track: mrdaw_core::TrackIndex(i), len: buffer.len() })
        })
        .collect();
    let mut audio = Sha256::new();
    for hasher in std::mem::take(&mut sim.hashers) {
        audio.update(hasher.finalize());
    }
    sim.stats.datagrams = sim.net.sent;
    sim.stats.lost = sim.net.lost;

    let mut report = SimReport {
        model: *model,
        settings: SimSettings {
            users,
            tracks_per_user: config.session.tracks_per_user,
            sample_rate: sr,
            redundancy: config.redundancy,
            broadcast_interval_ms: config.broadcast_interval_ms,
        },
        events: trace.len(),
        last_event_ms: to_ms(last_event),
        bound_ms: to_ms(bound),
        horizon_ms: to_ms(horizon),
        state_hash: state_hash(&final_view),
        final_snapshot,
        clients,
        loops,
        trajectory: sim.trajectory,
        network: sim.stats,
        max_abs_sample: sim.max_abs,
        audio_hash: hex::encode(audio.finalize()),
        violations: Vec::new(),
    };
    report.violations = check_invariants(&report);
    Ok(SimOutcome { report, host: sim.host })
}

pub fn state_hash(view: &SessionView) -> String {
    let json = serde_json::to_vec(view).expect("views serialize");
    hex::encode(Sha256::digest(&json))
}
