//! OSC 1.0 messages: the byte codec and the session's address map.

mod address;
mod codec;

pub use address::{snapshot_messages, Downstream, RouteError, Upstream};
pub use codec::{decode, encode, DecodeError, DecodeErrorKind, EncodeError, OscArg, WireMessage};
