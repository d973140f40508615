//! Deterministic stand-in for a performer's microphone.
//!
//! Only integer arithmetic and correctly rounded float division are used, so
//! the signal is bit-identical on every platform.

use crate::session::SampleTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sawtooth {
    period: u64,
}

impl Sawtooth {
    pub fn new(period: u64) -> Self {
        Sawtooth { period: period.max(2) }
    }

    /// Distinct pitch per user slot.
    pub fn for_user(slot: usize) -> Self {
        Self::new(211 + 37 * slot as u64)
    }

    /// Sample at absolute session time `t`, in [-0.25, 0.25).
    pub fn sample(&self, t: SampleTime) -> f32 {
        let pos = (t % self.period) as f32 / self.period as f32;
        (pos - 0.5) * 0.5
    }

    pub fn render(&self, start: SampleTime, frames: usize) -> Vec<f32> {
        (0..frames as u64).map(|k| self.sample(start + k)).collect()
    }
}
