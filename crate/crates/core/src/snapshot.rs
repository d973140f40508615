//! Serializable views of the session, as broadcast to clients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::session::{TrackIndex, Transport, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Empty,
    Recording,
    Playing,
    Muted,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Empty => "empty",
            TrackStatus::Recording => "recording",
            TrackStatus::Playing => "playing",
            TrackStatus::Muted => "muted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackView {
    pub index: TrackIndex,
    pub state: TrackStatus,
    pub owner: UserId,
}

/// Everything a client displays. The playhead is left out on purpose: it
/// moves every sample and clients derive nothing from it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub transport: Transport,
    /// Loop length in samples, 0 while unset.
    pub looplen: usize,
    pub tracks: Vec<TrackView>,
    pub cursors: BTreeMap<UserId, TrackIndex>,
}

impl SessionView {
    /// Cursor tracks that are still empty, per user.
    pub fn selected(&self) -> BTreeMap<UserId, Option<TrackIndex>> {
        self.cursors
            .iter()
            .map(|(&user, &cursor)| {
                let empty = self
                    .tracks
                    .get(cursor.0)
                    .is_some_and(|t| t.state == TrackStatus::Empty);
                (user, empty.then_some(cursor))
            })
            .collect()
    }

    /// Display string for a track, with the derived `selected` marker.
    pub fn display_state(&self, track: TrackIndex) -> Option<&'static str> {
        let view = self.tracks.get(track.0)?;
        let selected = view.state == TrackStatus::Empty && self.cursors.values().any(|&c| c == track);
        Some(if selected { "selected" } else { view.state.as_str() })
    }
}

/// A numbered full-state broadcast.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    #[serde(flatten)]
    pub view: SessionView,
}
