//! Session address map.
//!
//! Upstream (client to server):
//!
//! | address                            | args                         |
//! |------------------------------------|------------------------------|
//! | `/mrdaw/{user}/pedal/record`       | optional int32 client millis |
//! | `/mrdaw/{user}/pedal/play`         |                              |
//! | `/mrdaw/{user}/pedal/stop`         |                              |
//! | `/mrdaw/{user}/ui/track/{i}/toggle`|                              |
//! | `/mrdaw/{user}/hello`              | string client name           |
//!
//! Downstream (server to clients): `/mrdaw/state/track/{i}` with one of
//! `empty recording playing muted selected`, `/mrdaw/state/transport` with
//! `playing` or `stopped`, `/mrdaw/state/looplen` with the loop length in
//! samples (0 while unset) and `/mrdaw/debug` with free text.

use thiserror::Error;

use super::codec::{OscArg, WireMessage};
use crate::session::{TrackIndex, Transport, UserId};
use crate::snapshot::SessionView;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("no route for {0}")]
    UnknownAddress(String),
    #[error("bad arguments for {address}: {reason}")]
    BadArguments { address: String, reason: &'static str },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Upstream {
    Record { user: UserId, client_ms: Option<i32> },
    Play { user: UserId },
    Stop { user: UserId },
    Toggle { user: UserId, track: TrackIndex },
    Hello { user: UserId, name: String },
}

impl Upstream {
    pub fn user(&self) -> UserId {
        match self {
            Upstream::Record { user, .. }
            | Upstream::Play { user }
            | Upstream::Stop { user }
            | Upstream::Toggle { user, .. }
            | Upstream::Hello { user, .. } => *user,
        }
    }

    pub fn to_message(&self) -> WireMessage {
        match self {
            Upstream::Record { user, client_ms } => WireMessage::new(
                format!("/mrdaw/{}/pedal/record", user.0),
                client_ms.iter().map(|&ms| OscArg::Int(ms)).collect(),
            ),
            Upstream::Play { user } => WireMessage::bare(format!("/mrdaw/{}/pedal/play", user.0)),
            Upstream::Stop { user } => WireMessage::bare(format!("/mrdaw/{}/pedal/stop", user.0)),
            Upstream::Toggle { user, track } => {
                WireMessage::bare(format!("/mrdaw/{}/ui/track/{}/toggle", user.0, track.0))
            }
            Upstream::Hello { user, name } => {
                WireMessage::new(format!("/mrdaw/{}/hello", user.0), vec![OscArg::Str(name.clone())])
            }
        }
    }

    pub fn from_message(msg: &WireMessage) -> Result<Self, RouteError> {
        let unknown = || RouteError::UnknownAddress(msg.address.clone());
        let bad = |reason| RouteError::BadArguments { address: msg.address.clone(), reason };
        let parts: Vec<&str> = msg.address.split('/').skip(1).collect();
        let ["mrdaw", user, rest @ ..] = parts.as_slice() else {
            return Err(unknown());
        };
        let user = UserId(user.parse().map_err(|_| unknown())?);
        let no_args = |route: Upstream| if msg.args.is_empty() { Ok(route) } else { Err(bad("expected no arguments")) };
        match rest {
            ["pedal", "record"] => match msg.args.as_slice() {
                [] => Ok(Upstream::Record { user, client_ms: None }),
                [OscArg::Int(ms)] => Ok(Upstream::Record { user, client_ms: Some(*ms) }),
                _ => Err(bad("expected an optional int32 timestamp")),
            },
            ["pedal", "play"] => no_args(Upstream::Play { user }),
            ["pedal", "stop"] => no_args(Upstream::Stop { user }),
            ["ui", "track", i, "toggle"] => {
                let track = TrackIndex(i.parse().map_err(|_| unknown())?);
                no_args(Upstream::Toggle { user, track })
            }
            ["hello"] => match msg.args.as_slice() {
                [OscArg::Str(name)] => Ok(Upstream::Hello { user, name: name.clone() }),
                _ => Err(bad("expected a client name")),
            },
            _ => Err(unknown()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Downstream {
    TrackState { track: TrackIndex, state: String },
    Transport(Transport),
    LoopLen(i32),
    Debug(String),
}

impl Downstream {
    pub fn to_message(&self) -> WireMessage {
        match self {
            Downstream::TrackState { track, state } => {
                WireMessage::new(format!("/mrdaw/state/track/{}", track.0), vec![OscArg::Str(state.clone())])
            }
            Downstream::Transport(t) => {
                let s = match t {
                    Transport::Playing => "playing",
                    Transport::Stopped => "stopped",
                };
                WireMessage::new("/mrdaw/state/transport", vec![OscArg::Str(s.into())])
            }
            Downstream::LoopLen(len) => WireMessage::new("/mrdaw/state/looplen", vec![OscArg::Int(*len)]),
            Downstream::Debug(text) => WireMessage::new("/mrdaw/debug", vec![OscArg::Str(text.clone())]),
        }
    }

    pub fn from_message(msg: &WireMessage) -> Result<Self, RouteError> {
        let unknown = || RouteError::UnknownAddress(msg.address.clone());
        let bad = |reason| RouteError::BadArguments { address: msg.address.clone(), reason };
        let parts: Vec<&str> = msg.address.split('/').skip(1).collect();
        match (parts.as_slice(), msg.args.as_slice()) {
            (["mrdaw", "state", "track", i], [OscArg::Str(state)]) => Ok(Downstream::TrackState {
                track: TrackIndex(i.parse().map_err(|_| unknown())?),
                state: state.clone(),
            }),
            (["mrdaw", "state", "transport"], [OscArg::Str(s)]) => match s.as_str() {
                "playing" => Ok(Downstream::Transport(Transport::Playing)),
                "stopped" => Ok(Downstream::Transport(Transport::Stopped)),
                _ => Err(bad("unknown transport state")),
            },
            (["mrdaw", "state", "looplen"], [OscArg::Int(len)]) => Ok(Downstream::LoopLen(*len)),
            (["mrdaw", "debug"], [OscArg::Str(text)]) => Ok(Downstream::Debug(text.clone())),
            (["mrdaw", "state", ..] | ["mrdaw", "debug"], _) => Err(bad("unexpected arguments")),
            _ => Err(unknown()),
        }
    }
}

/// One message per track, then transport and loop length.
pub fn snapshot_messages(view: &SessionView) -> Vec<WireMessage> {
    let mut out: Vec<WireMessage> = view
        .tracks
        .iter()
        .map(|t| {
            Downstream::TrackState {
                track: t.index,
                state: view.display_state(t.index).unwrap_or("empty").to_string(),
            }
            .to_message()
        })
        .collect();
    out.push(Downstream::Transport(view.transport).to_message());
    let len = i32::try_from(view.looplen).unwrap_or(i32::MAX);
    out.push(Downstream::LoopLen(len).to_message());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osc::{decode, encode};
    use crate::session::{SessionConfig, SessionState};

    fn all_upstream() -> Vec<Upstream> {
        let u = UserId(2);
        vec![
            Upstream::Record { user: u, client_ms: None },
            Upstream::Record { user: u, client_ms: Some(1234) },
            Upstream::Play { user: u },
            Upstream::Stop { user: u },
            Upstream::Toggle { user: u, track: TrackIndex(7) },
            Upstream::Hello { user: u, name: "quest-2".into() },
        ]
    }

    #[test]
    fn upstream_routes_round_trip_through_bytes() {
        for route in all_upstream() {
            let bytes = encode(&route.to_message()).unwrap();
            assert_eq!(Upstream::from_message(&decode(&bytes).unwrap()).unwrap(), route);
        }
    }

    #[test]
    fn upstream_addresses() {
        assert_eq!(
            Upstream::Toggle { user: UserId(1), track: TrackIndex(3) }.to_message().address,
            "/mrdaw/1/ui/track/3/toggle"
        );
        assert_eq!(Upstream::Play { user: UserId(1) }.to_message().address, "/mrdaw/1/pedal/play");
    }

    #[test]
    fn unknown_and_malformed_routes() {
        assert!(matches!(Upstream::from_message(&WireMessage::bare("/foo")), Err(RouteError::UnknownAddress(_))));
        assert!(matches!(
            Upstream::from_message(&WireMessage::bare("/mrdaw/x/pedal/record")),
            Err(RouteError::UnknownAddress(_))
        ));
        assert!(matches!(
            Upstream::from_message(&WireMessage::new("/mrdaw/1/pedal/play", vec![OscArg::Int(1)])),
            Err(RouteError::BadArguments { .. })
        ));
        assert!(matches!(
            Upstream::from_message(&WireMessage::bare("/mrdaw/1/hello")),
            Err(RouteError::BadArguments { .. })
        ));
    }

    #[test]
    fn snapshot_of_fresh_session() {
        let view = SessionState::new(SessionConfig::default()).unwrap().view();
        let msgs = snapshot_messages(&view);
        assert_eq!(msgs.len(), 10);
        let decoded: Vec<Downstream> = msgs.iter().map(|m| Downstream::from_message(m).unwrap()).collect();
        assert_eq!(decoded[0], Downstream::TrackState { track: TrackIndex(0), state: "selected".into() });
        assert_eq!(decoded[1], Downstream::TrackState { track: TrackIndex(1), state: "empty".into() });
        assert_eq!(decoded[4], Downstream::TrackState { track: TrackIndex(4), state: "selected".into() });
        assert_eq!(decoded[8], Downstream::Transport(Transport::Stopped));
        assert_eq!(decoded[9], Downstream::LoopLen(0));
    }
}
