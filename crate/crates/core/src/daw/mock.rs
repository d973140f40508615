use std::collections::BTreeMap;

use super::{BackendCall, BackendError, DawBackend};
use crate::engine::{finalize_loop, CaptureBuffer, LoopBuffer, LoopStore};
use crate::session::{SampleTime, SessionState, TrackIndex, TrackVariant, Transport};

#[derive(Debug)]
struct OpenCapture {
    user_slot: usize,
    started_at: SampleTime,
    buffer: CaptureBuffer,
}

/// In-process DAW stand-in backed by the loop engine. It records live input
/// into captures, finalizes them into loops and keeps the loop store the
/// mixer reads from.
#[derive(Debug, Default)]
pub struct MockBackend {
    store: LoopStore,
    captures: BTreeMap<TrackIndex, OpenCapture>,
    master_len: Option<usize>,
    log: Vec<BackendCall>,
}

impl MockBackend {
    pub const NAME: &'static str = "mock";

    pub fn new() -> Self {
        Self::default()
    }

    /// Every call received so far, in order.
    pub fn calls(&self) -> &[BackendCall] {
        &self.log
    }

    pub fn capture_len(&self, track: TrackIndex) -> Option<usize> {
        self.captures.get(&track).map(|c| c.buffer.len())
    }
}

impl DawBackend for MockBackend {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn transport_start(&mut self, _session: &SessionState) -> Result<(), BackendError> {
        self.log.push(BackendCall::TransportStart);
        Ok(())
    }

    fn transport_stop(&mut self, _session: &SessionState) -> Result<(), BackendError> {
        self.log.push(BackendCall::TransportStop);
        Ok(())
    }

    fn start_capture(&mut self, track: TrackIndex, session: &SessionState) -> Result<(), BackendError> {
        self.log.push(BackendCall::StartCapture(track));
        let slot = session.track(track).ok_or(BackendError::NotRecording(track))?;
        let TrackVariant::Recording { started_at, .. } = slot.variant() else {
            return Err(BackendError::NotRecording(track));
        };
        let user_slot = session
            .config()
            .user_index(slot.owner())
            .expect("track owners are registered users");
        self.captures.insert(track, OpenCapture { user_slot, started_at, buffer: CaptureBuffer::new() });
        // An overwritten slot's loop is no longer referenced.
        self.store.retain_referenced(session);
        Ok(())
    }

    fn stop_capture(&mut self, track: TrackIndex, session: &SessionState) -> Result<(), BackendError> {
        self.log.push(BackendCall::StopCapture(track));
        let mut capture = self.captures.remove(&track).ok_or(BackendError::NoCapture(track))?;
        let len = session.master_len().ok_or(BackendError::NoMasterLength)?;
        let id = session
            .track(track)
            .and_then(|t| t.content())
            .ok_or(BackendError::NotRecording(track))?;

        let first = self.master_len.is_none();
        self.master_len = Some(len);
        let (buffer, got) = if capture.buffer.is_empty() {
            // Recorded with the transport stopped the whole time: the track
            // still plays, so it holds silence of the session length.
            (LoopBuffer::new(vec![0.0; len])?, len)
        } else if first && capture.buffer.len() == len {
            finalize_loop(&capture.buffer, None)?
        } else {
            let phase = if first {
                0
            } else {
                session.phase_of(capture.started_at).expect("master length is set")
            };
            capture.buffer.set_start_phase(phase);
            finalize_loop(&capture.buffer, Some(len))?
        };
        if got != len {
            return Err(BackendError::LengthMismatch { expected: len, got });
        }
        self.store.insert(id, buffer);
        Ok(())
    }

    fn enable(&mut self, track: TrackIndex, _session: &SessionState) -> Result<(), BackendError> {
        self.log.push(BackendCall::Enable(track));
        Ok(())
    }

    fn disable(&mut self, track: TrackIndex, _session: &SessionState) -> Result<(), BackendError> {
        self.log.push(BackendCall::Disable(track));
        Ok(())
    }

    /// Captures grow while the transport runs. Before the loop length
    /// exists they also grow with the transport stopped.
    fn record_input(&mut self, session: &SessionState, live: &[&[f32]], frames: usize) {
        if session.transport() == Transport::Stopped && session.master_len().is_some() {
            return;
        }
        for capture in self.captures.values_mut() {
            match live.get(capture.user_slot) {
                Some(input) if input.len() >= frames => capture.buffer.append(&input[..frames]),
                _ => capture.buffer.append(&vec![0.0; frames]),
            }
        }
    }

    fn loops(&self) -> Option<&LoopStore> {
        Some(&self.store)
    }

    fn reset(&mut self) {
        self.store.clear();
        self.captures.clear();
        self.master_len = None;
    }
}
