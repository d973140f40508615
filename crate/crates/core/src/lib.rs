//! Core of the collaborative looping session.
//!
//! The crate is split along the planes of the system:
//!
//! - [`session`]: the pure state machine that turns control events into
//!   state transitions and effect commands.
//! - [`engine`]: the sample-accurate audio plane (captures, loop
//!   finalization, per-user mixing).
//! - [`osc`]: the OSC 1.0 codec and the session address map.
//! - [`daw`]: backends that carry out effect commands, selected by name.
//! - [`host`]: glues the three together on a single sample clock.

pub mod daw;
pub mod engine;
pub mod host;
pub mod osc;
pub mod session;
pub mod snapshot;
pub mod synth;
pub mod wav;

pub use daw::{BackendCall, BackendOptions, BackendRegistry, DawBackend};
pub use engine::{CaptureBuffer, LoopBuffer, LoopStore, MixFrame};
pub use host::SessionHost;
pub use session::{
    apply_event, ControlEvent, EffectCommand, EventKind, LoopId, SessionConfig, SessionState,
    TrackIndex, TrackState, TrackVariant, Transport, UserId,
};
pub use snapshot::{SessionView, Snapshot, TrackStatus, TrackView};
