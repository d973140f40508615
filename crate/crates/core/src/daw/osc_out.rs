use std::net::{SocketAddr, UdpSocket};

use super::{osc_out_translate, BackendCall, BackendError, DawBackend};
use crate::osc::encode;
use crate::session::{SessionState, TrackIndex};

/// Sends AbletonOSC-style messages to a running Live instance. It holds no
/// audio; the session's loops live inside Live.
#[derive(Debug)]
pub struct OscOutBackend {
    socket: UdpSocket,
    target: SocketAddr,
    sent: u64,
}

impl OscOutBackend {
    pub const NAME: &'static str = "osc-out";

    pub fn connect(target: SocketAddr) -> std::io::Result<Self> {
        let bind: SocketAddr = if target.is_ipv4() {
            "0.0.0.0:0".parse().expect("literal address")
        } else {
            "[::]:0".parse().expect("literal address")
        };
        let socket = UdpSocket::bind(bind)?;
        Ok(OscOutBackend { socket, target, sent: 0 })
    }

    pub fn target(&self) -> SocketAddr {
        self.target
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    fn send(&mut self, call: BackendCall) -> Result<(), BackendError> {
        let bytes = encode(&osc_out_translate(call))?;
        self.socket.send_to(&bytes, self.target)?;
        self.sent += 1;
        Ok(())
    }
}

impl DawBackend for OscOutBackend {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn transport_start(&mut self, _: &SessionState) -> Result<(), BackendError> {
        self.send(BackendCall::TransportStart)
    }

    fn transport_stop(&mut self, _: &SessionState) -> Result<(), BackendError> {
        self.send(BackendCall::TransportStop)
    }

    fn start_capture(&mut self, track: TrackIndex, _: &SessionState) -> Result<(), BackendError> {
        self.send(BackendCall::StartCapture(track))
    }

    fn stop_capture(&mut self, track: TrackIndex, _: &SessionState) -> Result<(), BackendError> {
        self.send(BackendCall::StopCapture(track))
    }

    fn enable(&mut self, track: TrackIndex, _: &SessionState) -> Result<(), BackendError> {
        self.send(BackendCall::Enable(track))
    }

    fn disable(&mut self, track: TrackIndex, _: &SessionState) -> Result<(), BackendError> {
        self.send(BackendCall::Disable(track))
    }
}
