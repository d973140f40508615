//! Deterministic network simulation of a loop session.
//!
//! A trace of pedal presses is replayed through simulated clients and a
//! lossy, jittery network into a server running the real session host. The
//! run produces a [`SimReport`] with every client's final view, convergence
//! times, state and audio hashes, and any invariant violations.

pub mod invariants;
pub mod latency;
pub mod report;
pub mod sim;
pub mod trace;

pub use invariants::check_invariants;
pub use latency::{LatencyModel, PRESETS};
pub use report::{SimReport, Violation};
pub use sim::{convergence_bound, run, simulate, SimConfig, SimError, SimOutcome};
pub use trace::{load_trace, parse_trace, Action, TraceEvent};
