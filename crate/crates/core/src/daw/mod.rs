//! Backends that carry out the effect commands of the state machine.
//!
//! Every backend implements [`DawBackend`] and is registered by name in a
//! [`BackendRegistry`]; the server and simulator pick one at runtime.

mod mock;
mod osc_out;

use std::collections::BTreeMap;
use std::fmt;
use std::net::SocketAddr;

use thiserror::Error;

use crate::engine::{EngineError, LoopStore};
use crate::osc::{OscArg, WireMessage};
use crate::session::{EffectCommand, SessionConfig, SessionState, TrackIndex};

pub use mock::MockBackend;
pub use osc_out::OscOutBackend;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackendCall {
    TransportStart,
    TransportStop,
    StartCapture(TrackIndex),
    StopCapture(TrackIndex),
    Enable(TrackIndex),
    Disable(TrackIndex),
}

impl fmt::Display for BackendCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendCall::TransportStart => write!(f, "transport_start"),
            BackendCall::TransportStop => write!(f, "transport_stop"),
            BackendCall::StartCapture(t) => write!(f, "start_capture({})", t.0),
            BackendCall::StopCapture(t) => write!(f, "stop_capture({})", t.0),
            BackendCall::Enable(t) => write!(f, "enable({})", t.0),
            BackendCall::Disable(t) => write!(f, "disable({})", t.0),
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("no backend registered as {0:?}")]
    UnknownBackend(String),
    #[error("backend {0:?} needs option {1}")]
    MissingOption(&'static str, &'static str),
    #[error("no open capture on {0}")]
    NoCapture(TrackIndex),
    #[error("{0} is not recording")]
    NotRecording(TrackIndex),
    #[error("session has no loop length at finalize time")]
    NoMasterLength,
    #[error("finalized loop has {got} samples, session expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("OSC encode: {0}")]
    Encode(#[from] crate::osc::EncodeError),
}

/// What the controller can ask of a DAW. Each call sees the session state
/// that resulted from the event being dispatched.
pub trait DawBackend: Send {
    fn name(&self) -> &str;

    fn transport_start(&mut self, session: &SessionState) -> Result<(), BackendError>;
    fn transport_stop(&mut self, session: &SessionState) -> Result<(), BackendError>;
    fn start_capture(&mut self, track: TrackIndex, session: &SessionState) -> Result<(), BackendError>;
    fn stop_capture(&mut self, track: TrackIndex, session: &SessionState) -> Result<(), BackendError>;
    fn enable(&mut self, track: TrackIndex, session: &SessionState) -> Result<(), BackendError>;
    fn disable(&mut self, track: TrackIndex, session: &SessionState) -> Result<(), BackendError>;

    /// Feeds one block of live input, one slice per user slot. Backends that
    /// record in-process append it to their open captures.
    fn record_input(&mut self, _session: &SessionState, _live: &[&[f32]], _frames: usize) {}

    /// Loops held in-process, for backends that mix locally.
    fn loops(&self) -> Option<&LoopStore> {
        None
    }

    fn reset(&mut self) {}
}

pub fn invoke(backend: &mut dyn DawBackend, call: BackendCall, session: &SessionState) -> Result<(), BackendError> {
    match call {
        BackendCall::TransportStart => backend.transport_start(session),
        BackendCall::TransportStop => backend.transport_stop(session),
        BackendCall::StartCapture(t) => backend.start_capture(t, session),
        BackendCall::StopCapture(t) => backend.stop_capture(t, session),
        BackendCall::Enable(t) => backend.enable(t, session),
        BackendCall::Disable(t) => backend.disable(t, session),
    }
}

/// Order-preserving map from effects to calls; broadcasts have no call.
pub fn plan_calls(effects: &[EffectCommand]) -> Vec<BackendCall> {
    effects
        .iter()
        .filter_map(|effect| match effect {
            EffectCommand::StartCapture { track, .. } => Some(BackendCall::StartCapture(*track)),
            EffectCommand::StopCaptureAndFinalize { track, .. } => Some(BackendCall::StopCapture(*track)),
            EffectCommand::TransportStart => Some(BackendCall::TransportStart),
            EffectCommand::TransportStop => Some(BackendCall::TransportStop),
            EffectCommand::TrackEnable(track) => Some(BackendCall::Enable(*track)),
            EffectCommand::TrackDisable(track) => Some(BackendCall::Disable(*track)),
            EffectCommand::Broadcast(_) => None,
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct DispatchReport {
    pub calls: Vec<BackendCall>,
    pub failures: Vec<(BackendCall, BackendError)>,
}

impl DispatchReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every call in order. A failing call is recorded and the rest still
/// run; the session state is never rolled back.
pub fn dispatch(effects: &[EffectCommand], backend: &mut dyn DawBackend, session: &SessionState) -> DispatchReport {
    let mut report = DispatchReport::default();
    for call in plan_calls(effects) {
        if let Err(err) = invoke(backend, call, session) {
            report.failures.push((call, err));
        }
        report.calls.push(call);
    }
    report
}

/// AbletonOSC message for a call. Each track maps to clip slot 0 of the
/// Live track with the same index.
pub fn osc_out_translate(call: BackendCall) -> WireMessage {
    let slot = |address: &str, t: TrackIndex| {
        WireMessage::new(address, vec![OscArg::Int(t.0 as i32), OscArg::Int(0)])
    };
    match call {
        BackendCall::TransportStart => WireMessage::bare("/live/song/start_playing"),
        BackendCall::TransportStop => WireMessage::bare("/live/song/stop_playing"),
        // Firing a slot toggles recording in session view.
        BackendCall::StartCapture(t) | BackendCall::StopCapture(t) => slot("/live/clip_slot/fire", t),
        BackendCall::Enable(t) => slot("/live/clip/fire", t),
        BackendCall::Disable(t) => slot("/live/clip/stop", t),
    }
}

#[derive(Clone, Debug)]
pub struct BackendOptions {
    pub session: SessionConfig,
    pub osc_out_target: Option<SocketAddr>,
}

impl BackendOptions {
    pub fn new(session: SessionConfig) -> Self {
        BackendOptions { session, osc_out_target: None }
    }
}

pub type BackendFactory = Box<dyn Fn(&BackendOptions) -> Result<Box<dyn DawBackend>, BackendError> + Send + Sync>;

/// Backends by name.
pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry { factories: BTreeMap::new() }
    }

    /// `mock` and `osc-out`.
    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        registry.register(MockBackend::NAME, |_| Ok(Box::new(MockBackend::new())));
        registry.register(OscOutBackend::NAME, |opts| {
            let target = opts
                .osc_out_target
                .ok_or(BackendError::MissingOption(OscOutBackend::NAME, "--osc-out-target"))?;
            Ok(Box::new(OscOutBackend::connect(target)?))
        });
        registry
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&BackendOptions) -> Result<Box<dyn DawBackend>, BackendError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, options: &BackendOptions) -> Result<Box<dyn DawBackend>, BackendError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| BackendError::UnknownBackend(name.to_string()))?;
        factory(options)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }
}
