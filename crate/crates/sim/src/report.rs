use mrdaw_core::{SessionView, Snapshot, TrackIndex, UserId};
use serde::{Deserialize, Serialize};

use crate::latency::LatencyModel;
use crate::trace::Action;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub users: usize,
    pub tracks_per_user: usize,
    pub sample_rate: u32,
    /// Copies sent of every datagram.
    pub redundancy: u32,
    pub broadcast_interval_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Applied,
    Rejected { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finalized {
    pub track: TrackIndex,
    pub len: usize,
}

/// One control event as the server applied it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Server arrival time in samples.
    pub t: u64,
    /// When the performer pressed, in samples.
    pub pressed_at: u64,
    pub user: UserId,
    pub event: Action,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track: Option<usize>,
    pub outcome: Outcome,
    pub view: SessionView,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finalized: Option<Finalized>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub backend_errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientReport {
    pub user: UserId,
    pub snapshots_received: u64,
    pub view: Option<Snapshot>,
    pub converged: bool,
    /// Virtual time from the last trace event until this client last
    /// changed its view, clamped at zero.
    pub convergence_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopReport {
    pub track: TrackIndex,
    pub len: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetStats {
    pub datagrams: u64,
    pub lost: u64,
    pub retransmissions: u64,
    pub duplicates_dropped: u64,
    pub broadcasts: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub name: String,
    pub detail: String,
}

impl Violation {
    pub fn new(name: &str, detail: impl Into<String>) -> Self {
        Violation { name: name.to_string(), detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub model: LatencyModel,
    pub settings: SimSettings,
    pub events: usize,
    pub last_event_ms: f64,
    pub bound_ms: f64,
    pub horizon_ms: f64,
    pub final_snapshot: Snapshot,
    pub clients: Vec<ClientReport>,
    pub loops: Vec<LoopReport>,
    pub trajectory: Vec<Step>,
    pub network: NetStats,
    pub max_abs_sample: f32,
    pub audio_hash: String,
    pub state_hash: String,
    pub violations: Vec<Violation>,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}
