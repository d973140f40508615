//! JSON messages exchanged with the web panel.

use mrdaw_core::{EventKind, Snapshot, TrackIndex};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PanelAction {
    Record,
    Play,
    Stop,
    Toggle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PanelMessage {
    Hello {
        user: u32,
    },
    /// Full snapshot; track states are the raw variants and the panel
    /// derives "selected" from `cursors`.
    State(Snapshot),
    Event {
        user: u32,
        event: PanelAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        track: Option<usize>,
        /// Performer's own clock in milliseconds, if it has one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_ms: Option<i64>,
    },
    Error {
        message: String,
    },
}

impl PanelMessage {
    pub fn error(message: impl Into<String>) -> Self {
        PanelMessage::Error { message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("panel messages serialize")
    }
}

/// The control event an `event` message asks for.
pub fn event_kind(event: PanelAction, track: Option<usize>) -> Result<EventKind, &'static str> {
    match (event, track) {
        (PanelAction::Record, _) => Ok(EventKind::RecordToggle),
        (PanelAction::Play, _) => Ok(EventKind::PlayAll),
        (PanelAction::Stop, _) => Ok(EventKind::StopAll),
        (PanelAction::Toggle, Some(t)) => Ok(EventKind::TrackToggle(TrackIndex(t))),
        (PanelAction::Toggle, None) => Err("toggle needs a track"),
    }
}
