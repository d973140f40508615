//! JSON Lines traces: one pedal or UI action per line.

use std::fmt;
use std::path::Path;

use mrdaw_core::{EventKind, TrackIndex, UserId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Record,
    Play,
    Stop,
    Toggle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub t_ms: f64,
    pub user: u32,
    pub event: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<usize>,
}

impl TraceEvent {
    pub fn user_id(&self) -> UserId {
        UserId(self.user)
    }

    pub fn kind(&self) -> EventKind {
        match self.event {
            Action::Record => EventKind::RecordToggle,
            Action::Play => EventKind::PlayAll,
            Action::Stop => EventKind::StopAll,
            Action::Toggle => EventKind::TrackToggle(TrackIndex(self.track.unwrap_or(0))),
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.event, self.track) {
            (Action::Toggle, Some(track)) => write!(f, "u{} toggle {} @{}ms", self.user, track, self.t_ms),
            (action, _) => write!(f, "u{} {:?} @{}ms", self.user, action, self.t_ms),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("cannot read trace: {0}")]
    Io(#[from] std::io::Error),
}

fn at(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Line { line, message: message.into() }
}

/// Parses a trace. Blank lines and lines starting with `#` are skipped;
/// line numbers in errors are 1-based.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events: Vec<TraceEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let ev: TraceEvent = serde_json::from_str(trimmed).map_err(|e| at(line, e.to_string()))?;
        if !ev.t_ms.is_finite() || ev.t_ms < 0.0 {
            return Err(at(line, format!("t_ms must be a non-negative number, got {}", ev.t_ms)));
        }
        if ev.user == 0 {
            return Err(at(line, "user ids start at 1"));
        }
        match (ev.event, ev.track) {
            (Action::Toggle, None) => return Err(at(line, "toggle needs a \"track\"")),
            (Action::Toggle, Some(_)) => {}
            (_, Some(_)) => return Err(at(line, "only toggle takes a \"track\"")),
            (_, None) => {}
        }
        if let Some(prev) = events.last() {
            if ev.t_ms < prev.t_ms {
                return Err(at(line, format!("t_ms {} goes back in time (previous {})", ev.t_ms, prev.t_ms)));
            }
        }
        events.push(ev);
    }
    Ok(events)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceEvent>, TraceError> {
    parse_trace(&std::fs::read_to_string(path)?)
}

pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&serde_json::to_string(ev).expect("trace events serialize"));
        out.push('\n');
    }
    out
}
