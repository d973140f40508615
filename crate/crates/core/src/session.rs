//! The collaborative looping protocol as a pure state machine.
//!
//! [`apply_event`] consumes one [`ControlEvent`] and returns the successor
//! [`SessionState`] together with the [`EffectCommand`]s the audio and DAW
//! planes must carry out. Nothing in here performs I/O or reads a clock; the
//! caller stamps every event with the session sample index.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::snapshot::{SessionView, TrackStatus, TrackView};

/// Absolute position on the session timeline, in samples.
pub type SampleTime = u64;

/// One-based user id, as it appears on the wire (`/mrdaw/1/...`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

/// Zero-based index into the session's track array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackIndex(pub usize);

impl fmt::Display for TrackIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "track {}", self.0)
    }
}

/// Handle of a finalized loop in the loop store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoopId(pub u64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub num_users: usize,
    pub tracks_per_user: usize,
    pub sample_rate: u32,
    /// Audio tick length in samples.
    pub block_size: usize,
    /// Gain applied to the live cross-feed between users.
    pub talk_gain: f32,
    /// One gain per track, `num_users * tracks_per_user` entries.
    pub track_gains: Vec<f32>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig::new(2, 4)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("a session needs at least one user")]
    NoUsers,
    #[error("each user needs at least one track")]
    NoTracks,
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("block size must be positive")]
    ZeroBlockSize,
    #[error("{what} gain {value} is outside [0, 1]")]
    GainOutOfRange { what: &'static str, value: f32 },
    #[error("expected {expected} track gains, got {got}")]
    GainCount { expected: usize, got: usize },
}

impl SessionConfig {
    pub fn new(num_users: usize, tracks_per_user: usize) -> Self {
        SessionConfig {
            num_users,
            tracks_per_user,
            sample_rate: 48_000,
            block_size: 256,
            talk_gain: 1.0,
            track_gains: vec![1.0; num_users * tracks_per_user],
        }
    }

    pub fn with_sample_rate(mut self, sample_rate: u32) -> Self {
        self.sample_rate = sample_rate;
        self
    }

    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size;
        self
    }

    pub fn total_tracks(&self) -> usize {
        self.num_users * self.tracks_per_user
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_users == 0 {
            return Err(ConfigError::NoUsers);
        }
        if self.tracks_per_user == 0 {
            return Err(ConfigError::NoTracks);
        }
        if self.sample_rate == 0 {
            return Err(ConfigError::ZeroSampleRate);
        }
        if self.block_size == 0 {
            return Err(ConfigError::ZeroBlockSize);
        }
        if !(0.0..=1.0).contains(&self.talk_gain) {
            return Err(ConfigError::GainOutOfRange { what: "talk", value: self.talk_gain });
        }
        if self.track_gains.len() != self.total_tracks() {
            return Err(ConfigError::GainCount {
                expected: self.total_tracks(),
                got: self.track_gains.len(),
            });
        }
        if let Some(&value) = self.track_gains.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(ConfigError::GainOutOfRange { what: "track", value });
        }
        Ok(())
    }

    /// Zero-based slot of a registered user, `None` for unknown ids.
    pub fn user_index(&self, user: UserId) -> Option<usize> {
        let idx = (user.0 as usize).checked_sub(1)?;
        (idx < self.num_users).then_some(idx)
    }

    pub fn user_at(&self, index: usize) -> UserId {
        UserId(index as u32 + 1)
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        (0..self.num_users).map(|i| self.user_at(i))
    }

    /// Track indices owned by the user in slot `user_index`.
    pub fn allocation(&self, user_index: usize) -> Range<usize> {
        let start = user_index * self.tracks_per_user;
        start..start + self.tracks_per_user
    }

    pub fn owner_of(&self, track: TrackIndex) -> UserId {
        self.user_at(track.0 / self.tracks_per_user)
    }

    /// Converts virtual milliseconds to the nearest sample index.
    pub fn samples_from_ms(&self, ms: f64) -> SampleTime {
        (ms * self.sample_rate as f64 / 1000.0).round().max(0.0) as SampleTime
    }

    pub fn ms_from_samples(&self, samples: SampleTime) -> f64 {
        samples as f64 * 1000.0 / self.sample_rate as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Playing,
    Stopped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackVariant {
    Empty,
    Recording {
        /// Server sample index at which capture began.
        started_at: SampleTime,
        /// The performer's own timestamp for the start press, when the
        /// client supplied one.
        performer_start: Option<SampleTime>,
    },
    Playing,
    Muted,
}

impl TrackVariant {
    pub fn status(&self) -> TrackStatus {
        match self {
            TrackVariant::Empty => TrackStatus::Empty,
            TrackVariant::Recording { .. } => TrackStatus::Recording,
            TrackVariant::Playing => TrackStatus::Playing,
            TrackVariant::Muted => TrackStatus::Muted,
        }
    }

    pub fn has_content(&self) -> bool {
        matches!(self, TrackVariant::Playing | TrackVariant::Muted)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackState {
    variant: TrackVariant,
    owner: UserId,
    content: Option<LoopId>,
}

impl TrackState {
    fn empty(owner: UserId) -> Self {
        TrackState { variant: TrackVariant::Empty, owner, content: None }
    }

    pub fn variant(&self) -> TrackVariant {
        self.variant
    }

    pub fn owner(&self) -> UserId {
        self.owner
    }

    pub fn content(&self) -> Option<LoopId> {
        self.content
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    RecordToggle,
    PlayAll,
    StopAll,
    TrackToggle(TrackIndex),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ControlEvent {
    /// Server sample index at which the event is applied.
    pub t: SampleTime,
    pub user: UserId,
    pub kind: EventKind,
    /// Advisory timestamp from the sending client's own clock, in samples.
    /// Only ever compared with another timestamp from the same client.
    pub client_t: Option<SampleTime>,
}

impl ControlEvent {
    pub fn new(t: SampleTime, user: UserId, kind: EventKind) -> Self {
        ControlEvent { t, user, kind, client_t: None }
    }

    pub fn with_client_time(mut self, client_t: SampleTime) -> Self {
        self.client_t = Some(client_t);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EffectCommand {
    StartCapture { user: UserId, track: TrackIndex },
    StopCaptureAndFinalize { user: UserId, track: TrackIndex },
    TransportStart,
    TransportStop,
    TrackEnable(TrackIndex),
    TrackDisable(TrackIndex),
    Broadcast(SessionView),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("{track} is out of range (session has {total} tracks)")]
    TrackOutOfRange { track: TrackIndex, total: usize },
    #[error("event at sample {t} precedes sample {floor}")]
    OutOfOrder { t: SampleTime, floor: SampleTime },
    #[error("{user} tried to finish an empty take on {track}")]
    EmptyTake { user: UserId, track: TrackIndex },
}

/// Successor state plus the commands that realize it.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: SessionState,
    pub effects: Vec<EffectCommand>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    config: SessionConfig,
    transport: Transport,
    master_len: Option<usize>,
    playhead: usize,
    tracks: Vec<TrackState>,
    cursors: Vec<TrackIndex>,
    epoch: SampleTime,
    next_loop_id: u64,
}

impl SessionState {
    pub fn new(config: SessionConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let tracks = (0..config.total_tracks())
            .map(|i| TrackState::empty(config.owner_of(TrackIndex(i))))
            .collect();
        let cursors = (0..config.num_users)
            .map(|u| TrackIndex(config.allocation(u).start))
            .collect();
        Ok(SessionState {
            config,
            transport: Transport::Stopped,
            master_len: None,
            playhead: 0,
            tracks,
            cursors,
            epoch: 0,
            next_loop_id: 0,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn transport(&self) -> Transport {
        self.transport
    }

    /// The shared loop length `L`, fixed by the first finalized take.
    pub fn master_len(&self) -> Option<usize> {
        self.master_len
    }

    pub fn playhead(&self) -> usize {
        self.playhead
    }

    pub(crate) fn set_playhead(&mut self, playhead: usize) {
        self.playhead = playhead;
    }

    /// Session sample index that loop position 0 is aligned to.
    pub fn epoch(&self) -> SampleTime {
        self.epoch
    }

    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    pub fn track(&self, track: TrackIndex) -> Option<&TrackState> {
        self.tracks.get(track.0)
    }

    pub fn cursor(&self, user: UserId) -> Option<TrackIndex> {
        self.config.user_index(user).map(|u| self.cursors[u])
    }

    /// The user's track that is currently capturing, if any.
    pub fn recording_track(&self, user: UserId) -> Option<TrackIndex> {
        let u = self.config.user_index(user)?;
        self.config
            .allocation(u)
            .find(|&i| matches!(self.tracks[i].variant, TrackVariant::Recording { .. }))
            .map(TrackIndex)
    }

    /// Loop position at which a capture that began at `started_at` lands.
    pub fn phase_of(&self, started_at: SampleTime) -> Option<usize> {
        let len = self.master_len? as i128;
        Some((started_at as i128 - self.epoch as i128).rem_euclid(len) as usize)
    }

    /// Each user's cursor track when it is empty; that is the blue marker.
    pub fn selected_tracks(&self) -> BTreeMap<UserId, Option<TrackIndex>> {
        self.cursors
            .iter()
            .enumerate()
            .map(|(u, &cursor)| {
                let selected = (self.tracks[cursor.0].variant == TrackVariant::Empty).then_some(cursor);
                (self.config.user_at(u), selected)
            })
            .collect()
    }

    /// Moves the user's cursor to their lowest empty slot. With no empty
    /// slot left it steps cyclically, so a full allocation wraps from the
    /// last slot back to the first and overwrites proceed in order.
    pub fn advance_cursor(&mut self, user: UserId) {
        let Some(u) = self.config.user_index(user) else {
            return;
        };
        let slots = self.config.allocation(u);
        let next = slots
            .clone()
            .find(|&i| self.tracks[i].variant == TrackVariant::Empty)
            .unwrap_or_else(|| {
                let offset = self.cursors[u].0 - slots.start;
                slots.start + (offset + 1) % self.config.tracks_per_user
            });
        self.cursors[u] = TrackIndex(next);
    }

    /// Fresh session with the same configuration.
    pub fn reset(&self) -> SessionState {
        SessionState::new(self.config.clone()).expect("config was validated on construction")
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            transport: self.transport,
            looplen: self.master_len.unwrap_or(0),
            tracks: self
                .tracks
                .iter()
                .enumerate()
                .map(|(i, t)| TrackView { index: TrackIndex(i), state: t.variant.status(), owner: t.owner })
                .collect(),
            cursors: self
                .cursors
                .iter()
                .enumerate()
                .map(|(u, &c)| (self.config.user_at(u), c))
                .collect(),
        }
    }

    fn start_transport(&mut self, t: SampleTime, effects: &mut Vec<EffectCommand>) {
        self.transport = Transport::Playing;
        self.epoch = t;
        self.playhead = 0;
        effects.push(EffectCommand::TransportStart);
    }

    fn start_take(&mut self, ev: &ControlEvent, u: usize, effects: &mut Vec<EffectCommand>) {
        let track = self.cursors[u];
        if self.transport == Transport::Stopped {
            self.start_transport(ev.t, effects);
        }
        // Overwriting a filled slot drops its loop right away.
        let slot = &mut self.tracks[track.0];
        slot.variant = TrackVariant::Recording { started_at: ev.t, performer_start: ev.client_t };
        slot.content = None;
        effects.push(EffectCommand::StartCapture { user: ev.user, track });
    }

    fn finish_take(
        &mut self,
        ev: &ControlEvent,
        track: TrackIndex,
        effects: &mut Vec<EffectCommand>,
    ) -> Result<(), EventError> {
        let TrackVariant::Recording { started_at, performer_start } = self.tracks[track.0].variant else {
            unreachable!("finish_take called on a track that is not recording");
        };
        if ev.t < started_at {
            return Err(EventError::OutOfOrder { t: ev.t, floor: started_at });
        }
        if ev.t == started_at {
            return Err(EventError::EmptyTake { user: ev.user, track });
        }
        if self.master_len.is_none() {
            // The performer's own interval wins over the server interval so
            // that network jitter does not leak into the loop length.
            let len = match (performer_start, ev.client_t) {
                (Some(a), Some(b)) if b > a => b - a,
                _ => ev.t - started_at,
            };
            self.master_len = Some(len as usize);
            self.epoch = started_at;
            self.playhead = ((ev.t - started_at) % len) as usize;
        }
        let id = LoopId(self.next_loop_id);
        self.next_loop_id += 1;
        let slot = &mut self.tracks[track.0];
        slot.variant = TrackVariant::Playing;
        slot.content = Some(id);
        effects.push(EffectCommand::StopCaptureAndFinalize { user: ev.user, track });
        effects.push(EffectCommand::TrackEnable(track));
        self.advance_cursor(ev.user);
        Ok(())
    }
}

/// Applies one control event. Rejected events leave the caller's state
/// untouched; the error names the reason.
pub fn apply_event(state: &SessionState, ev: &ControlEvent) -> Result<Transition, EventError> {
    let config = &state.config;
    let u = config.user_index(ev.user).ok_or(EventError::UnknownUser(ev.user))?;
    if let EventKind::TrackToggle(track) = ev.kind {
        if track.0 >= config.total_tracks() {
            return Err(EventError::TrackOutOfRange { track, total: config.total_tracks() });
        }
    }
    if ev.t < state.epoch {
        return Err(EventError::OutOfOrder { t: ev.t, floor: state.epoch });
    }

    let mut next = state.clone();
    let mut effects = Vec::new();
    match ev.kind {
        EventKind::RecordToggle => match state.recording_track(ev.user) {
            Some(track) => next.finish_take(ev, track, &mut effects)?,
            None => next.start_take(ev, u, &mut effects),
        },
        EventKind::PlayAll => next.start_transport(ev.t, &mut effects),
        EventKind::StopAll => {
            next.transport = Transport::Stopped;
            effects.push(EffectCommand::TransportStop);
        }
        EventKind::TrackToggle(track) => {
            let slot = &mut next.tracks[track.0];
            match slot.variant {
                TrackVariant::Playing => {
                    slot.variant = TrackVariant::Muted;
                    effects.push(EffectCommand::TrackDisable(track));
                }
                TrackVariant::Muted => {
                    slot.variant = TrackVariant::Playing;
                    effects.push(EffectCommand::TrackEnable(track));
                }
                TrackVariant::Empty | TrackVariant::Recording { .. } => {}
            }
        }
    }

    let view = next.view();
    if view != state.view() {
        effects.push(EffectCommand::Broadcast(view));
    }
    Ok(Transition { state: next, effects })
}
