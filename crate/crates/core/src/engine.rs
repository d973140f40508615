//! Sample-accurate audio plane: captures, loop finalization and mixing.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::session::{LoopId, SessionState, TrackIndex, TrackVariant, Transport, UserId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("cannot finalize an empty capture")]
    EmptyCapture,
    #[error("loop length must be positive")]
    ZeroLength,
    #[error("start phase {phase} is not inside a loop of {len} samples")]
    PhaseOutOfRange { phase: usize, len: usize },
    #[error("non-finite sample at position {0}")]
    NonFinite(usize),
    #[error("block size must be positive")]
    ZeroBlock,
}

/// One finalized loop. Immutable once built, cheap to clone.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopBuffer {
    samples: Arc<[f32]>,
}

impl LoopBuffer {
    pub fn new(samples: Vec<f32>) -> Result<Self, EngineError> {
        if samples.is_empty() {
            return Err(EngineError::ZeroLength);
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(EngineError::NonFinite(pos));
        }
        Ok(LoopBuffer { samples: samples.into() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }
}

/// An in-flight recording.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CaptureBuffer {
    samples: Vec<f32>,
    start_phase: usize,
}

impl CaptureBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: Vec<f32>, start_phase: usize) -> Self {
        CaptureBuffer { samples, start_phase }
    }

    pub fn append(&mut self, block: &[f32]) {
        self.samples.extend_from_slice(block);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn start_phase(&self) -> usize {
        self.start_phase
    }

    pub fn set_start_phase(&mut self, phase: usize) {
        self.start_phase = phase;
    }
}

pub fn capture_append(mut cap: CaptureBuffer, block: &[f32]) -> CaptureBuffer {
    cap.append(block);
    cap
}

/// Turns a capture into a loop of the session length.
///
/// Without a master length the capture becomes the loop as-is and defines
/// the length. Otherwise capture sample `k` lands on loop position
/// `(start_phase + k) mod L` for `k < min(len, L)`; short takes are padded
/// with silence and long takes keep only their first `L` samples.
pub fn finalize_loop(cap: &CaptureBuffer, master_len: Option<usize>) -> Result<(LoopBuffer, usize), EngineError> {
    if cap.is_empty() {
        return Err(EngineError::EmptyCapture);
    }
    let Some(len) = master_len else {
        let buffer = LoopBuffer::new(cap.samples.clone())?;
        let len = buffer.len();
        return Ok((buffer, len));
    };
    if len == 0 {
        return Err(EngineError::ZeroLength);
    }
    let phase = cap.start_phase;
    if phase >= len {
        return Err(EngineError::PhaseOutOfRange { phase, len });
    }
    let take = &cap.samples[..cap.len().min(len)];
    let mut out = vec![0.0f32; len];
    let head = take.len().min(len - phase);
    out[phase..phase + head].copy_from_slice(&take[..head]);
    out[..take.len() - head].copy_from_slice(&take[head..]);
    Ok((LoopBuffer::new(out)?, len))
}

/// Finalized loops by id.
#[derive(Clone, Debug, Default)]
pub struct LoopStore {
    loops: BTreeMap<LoopId, LoopBuffer>,
}

impl LoopStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: LoopId, buffer: LoopBuffer) {
        self.loops.insert(id, buffer);
    }

    pub fn get(&self, id: LoopId) -> Option<&LoopBuffer> {
        self.loops.get(&id)
    }

    pub fn remove(&mut self, id: LoopId) -> Option<LoopBuffer> {
        self.loops.remove(&id)
    }

    /// Drops every loop the session no longer references.
    pub fn retain_referenced(&mut self, state: &SessionState) {
        self.loops
            .retain(|id, _| state.tracks().iter().any(|t| t.content() == Some(*id)));
    }

    pub fn clear(&mut self) {
        self.loops.clear();
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LoopId, &LoopBuffer)> {
        self.loops.iter().map(|(id, b)| (*id, b))
    }
}

/// One output block per registered user.
#[derive(Clone, Debug, PartialEq)]
pub struct MixFrame {
    pub block_size: usize,
    pub outputs: Vec<Vec<f32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MixDiagnostic {
    MissingLiveInput(UserId),
    MissingLoop { track: TrackIndex, id: LoopId },
    LengthMismatch { track: TrackIndex, len: usize, master_len: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixOutput {
    pub frame: MixFrame,
    /// Playhead after the block.
    pub playhead: usize,
    pub diagnostics: Vec<MixDiagnostic>,
}

/// Mixes one block. Every user hears all playing loops plus everyone
/// else's live input scaled by the talk gain, never their own microphone.
/// `live[u]` is the input of the user in slot `u`; missing or short inputs
/// count as silence.
pub fn mix_tick(
    state: &SessionState,
    store: &LoopStore,
    live: &[&[f32]],
    block: usize,
) -> Result<MixOutput, EngineError> {
    if block == 0 {
        return Err(EngineError::ZeroBlock);
    }
    let config = state.config();
    let mut diagnostics = Vec::new();
    let mut bus = vec![0.0f32; block];
    let mut playhead = state.playhead();

    if let (Transport::Playing, Some(len)) = (state.transport(), state.master_len()) {
        for (i, track) in state.tracks().iter().enumerate() {
            if track.variant() != TrackVariant::Playing {
                continue;
            }
            let index = TrackIndex(i);
            let Some(id) = track.content() else { continue };
            let Some(buffer) = store.get(id) else {
                diagnostics.push(MixDiagnostic::MissingLoop { track: index, id });
                continue;
            };
            if buffer.len() != len {
                diagnostics.push(MixDiagnostic::LengthMismatch { track: index, len: buffer.len(), master_len: len });
                continue;
            }
            let gain = config.track_gains[i];
            let samples = buffer.samples();
            let mut pos = playhead % len;
            let mut k = 0;
            while k < block {
                let run = (block - k).min(len - pos);
                for (out, s) in bus[k..k + run].iter_mut().zip(&samples[pos..pos + run]) {
                    *out += gain * s;
                }
                k += run;
                pos = (pos + run) % len;
            }
        }
        playhead = (playhead + block) % len;
    }

    let silence = vec![0.0f32; block];
    let inputs: Vec<&[f32]> = (0..config.num_users)
        .map(|u| match live.get(u) {
            Some(input) if input.len() >= block => &input[..block],
            _ => {
                diagnostics.push(MixDiagnostic::MissingLiveInput(config.user_at(u)));
                &silence[..]
            }
        })
        .collect();

    let talk_gain = config.talk_gain;
    let outputs = (0..config.num_users)
        .map(|u| {
            bus.iter()
                .enumerate()
                .map(|(k, &music)| {
                    let mut talk = 0.0f32;
                    for (v, input) in inputs.iter().enumerate() {
                        if v != u {
                            talk += input[k];
                        }
                    }
                    (music + talk_gain * talk).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect();

    Ok(MixOutput { frame: MixFrame { block_size: block, outputs }, playhead, diagnostics })
}

/// Offline bounce of `frames` samples per user with silent live inputs,
/// starting from the state's playhead.
pub fn render_session(state: &SessionState, store: &LoopStore, frames: usize) -> Vec<Vec<f32>> {
    let config = state.config();
    let block = config.block_size;
    let silence = vec![0.0f32; block];
    let live: Vec<&[f32]> = vec![&silence[..]; config.num_users];
    let mut cursor = state.clone();
    let mut out: Vec<Vec<f32>> = vec![Vec::with_capacity(frames); config.num_users];
    let mut remaining = frames;
    while remaining > 0 {
        let mix = mix_tick(&cursor, store, &live, block).expect("block size validated with the config");
        let take = remaining.min(block);
        for (dst, src) in out.iter_mut().zip(&mix.frame.outputs) {
            dst.extend_from_slice(&src[..take]);
        }
        cursor.set_playhead(mix.playhead);
        remaining -= take;
    }
    out
}
