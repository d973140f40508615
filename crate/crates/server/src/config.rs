use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::time::Duration;

use mrdaw_core::SessionConfig;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub bind: IpAddr,
    pub osc_port: u16,
    pub broadcast_port: u16,
    pub ws_port: u16,
    pub users: usize,
    pub tracks_per_user: usize,
    pub sample_rate: u32,
    pub block_size: usize,
    pub backend: String,
    pub osc_out_target: Option<SocketAddr>,
    pub export_dir: Option<PathBuf>,
    /// Files served from the HTTP root next to `/panel`.
    pub static_dir: Option<PathBuf>,
    /// Feed each user a deterministic test tone instead of silence.
    pub synthetic_input: bool,
    pub broadcast_interval: Duration,
    /// Clients with no traffic for this long are dropped.
    pub client_timeout: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: IpAddr::V4(Ipv4Addr::UNSPECIFIED),
            osc_port: 9000,
            broadcast_port: 9001,
            ws_port: 9002,
            users: 2,
            tracks_per_user: 4,
            sample_rate: 48_000,
            block_size: 256,
            backend: "mock".to_string(),
            osc_out_target: None,
            export_dir: None,
            static_dir: None,
            synthetic_input: false,
            broadcast_interval: Duration::from_millis(50),
            client_timeout: Duration::from_secs(10),
        }
    }
}

impl ServerConfig {
    /// All ports 0 on loopback, for tests.
    pub fn ephemeral() -> Self {
        ServerConfig {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            osc_port: 0,
            broadcast_port: 0,
            ws_port: 0,
            ..Self::default()
        }
    }

    pub fn session(&self) -> SessionConfig {
        SessionConfig::new(self.users, self.tracks_per_user)
            .with_sample_rate(self.sample_rate)
            .with_block_size(self.block_size)
    }
}
