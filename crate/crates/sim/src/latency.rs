//! Seeded per-datagram delay and loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub one_way_ms: f64,
    /// Half-width of the uniform jitter around `one_way_ms`.
    pub jitter_ms: f64,
    pub loss_pct: f64,
    pub seed: u64,
}

/// Named one-way delays. Engineering estimates, not measurements.
pub const PRESETS: &[(&str, f64)] = &[("local", 0.0), ("metro", 5.0), ("continental", 15.0), ("1000km-fiber", 10.0)];

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown latency preset {0:?} (known: local, metro, continental, 1000km-fiber)")]
    UnknownPreset(String),
    #[error("{what} must be a finite non-negative number, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("loss must be within [0, 100] percent, got {0}")]
    Loss(f64),
}

impl LatencyModel {
    pub fn new(one_way_ms: f64, jitter_ms: f64, loss_pct: f64, seed: u64) -> Result<Self, ModelError> {
        let model = LatencyModel { one_way_ms, jitter_ms, loss_pct, seed };
        model.validate()?;
        Ok(model)
    }

    pub fn local() -> Self {
        LatencyModel { one_way_ms: 0.0, jitter_ms: 0.0, loss_pct: 0.0, seed: 0 }
    }

    pub fn preset(name: &str) -> Result<Self, ModelError> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, ms)| LatencyModel { one_way_ms: ms, ..Self::local() })
            .ok_or_else(|| ModelError::UnknownPreset(name.to_string()))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (what, value) in [("one-way delay", self.one_way_ms), ("jitter", self.jitter_ms)] {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::Negative { what, value });
            }
        }
        if !(0.0..=100.0).contains(&self.loss_pct) {
            return Err(ModelError::Loss(self.loss_pct));
        }
        Ok(())
    }

    /// Largest delay any datagram can see, in samples.
    pub fn max_delay(&self, sample_rate: u32) -> u64 {
        ms_to_samples(self.one_way_ms + self.jitter_ms, sample_rate)
    }
}

pub fn ms_to_samples(ms: f64, sample_rate: u32) -> u64 {
    (ms * sample_rate as f64 / 1000.0).round().max(0.0) as u64
}

/// The network: one seeded stream of draws shared by all links, consumed in
/// event order, so a run is a pure function of the model.
#[derive(Debug)]
pub struct Network {
    model: LatencyModel,
    sample_rate: u32,
    rng: ChaCha8Rng,
    pub sent: u64,
    pub lost: u64,
}

impl Network {
    pub fn new(model: LatencyModel, sample_rate: u32) -> Self {
        Network { model, sample_rate, rng: ChaCha8Rng::seed_from_u64(model.seed), sent: 0, lost: 0 }
    }

    /// Delay in samples for one datagram, or `None` if it is dropped. Both
    /// draws happen for every datagram.
    pub fn transit(&mut self) -> Option<u64> {
        self.sent += 1;
        let dropped = self.rng.random::<f64>() * 100.0 < self.model.loss_pct;
        let offset = if self.model.jitter_ms > 0.0 {
            self.rng.random_range(-self.model.jitter_ms..=self.model.jitter_ms)
        } else {
            0.0
        };
        if dropped {
            self.lost += 1;
            return None;
        }
        Some(ms_to_samples((self.model.one_way_ms + offset).max(0.0), self.sample_rate))
    }
}
