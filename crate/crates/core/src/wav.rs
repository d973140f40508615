//! 32-bit float mono WAV output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{render_session, LoopStore};
use crate::session::SessionState;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("no loops recorded")]
    NoLoops,
    #[error("sample rate {0} does not fit a WAV header")]
    SampleRate(u32),
    #[error("{0} samples do not fit a WAV file")]
    TooLong(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

const FORMAT_IEEE_FLOAT: u16 = 3;

pub fn encode_f32_mono(samples: &[f32], sample_rate: u32) -> Result<Vec<u8>, ExportError> {
    let data_len = samples
        .len()
        .checked_mul(4)
        .and_then(|n| u32::try_from(n).ok())
        .filter(|n| n.checked_add(36).is_some())
        .ok_or(ExportError::TooLong(samples.len()))?;
    let byte_rate = sample_rate.checked_mul(4).ok_or(ExportError::SampleRate(sample_rate))?;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    Ok(out)
}

pub fn write_f32_mono(path: &Path, samples: &[f32], sample_rate: u32) -> Result<(), ExportError> {
    fs::write(path, encode_f32_mono(samples, sample_rate)?)?;
    Ok(())
}

/// Writes one loop period of each user's monitor mix (loops only, no live
/// input) to `dir/{prefix}-user{N}.wav`.
pub fn export_session(
    state: &SessionState,
    store: &LoopStore,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>, ExportError> {
    let len = match state.master_len() {
        Some(len) if !store.is_empty() => len,
        _ => return Err(ExportError::NoLoops),
    };
    // Bounce from the top of the loop so every file starts at phase 0.
    let mut from_top = state.clone();
    from_top.set_playhead(0);
    let outputs = render_session(&from_top, store, len);
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(outputs.len());
    for (user, samples) in state.config().users().zip(outputs) {
        let path = dir.join(format!("{prefix}-user{}.wav", user.0));
        write_f32_mono(&path, &samples, state.config().sample_rate)?;
        written.push(path);
    }
    Ok(written)
}
