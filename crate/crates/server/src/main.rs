use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;
use mrdaw_core::BackendRegistry;
use mrdaw_server::{start, ServerConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "mrdaw-server", version, about = "Collaborative loop-session server")]
struct Cli {
    /// Address all ports bind to.
    #[arg(long, default_value = "0.0.0.0")]
    bind: IpAddr,
    #[arg(long = "osc-port", default_value_t = 9000)]
    osc_port: u16,
    #[arg(long = "broadcast-port", default_value_t = 9001)]
    broadcast_port: u16,
    /// HTTP port serving /panel and the static root.
    #[arg(long = "ws-port", default_value_t = 9002)]
    ws_port: u16,
    #[arg(long, default_value_t = 2)]
    users: usize,
    #[arg(long = "tracks-per-user", default_value_t = 4)]
    tracks_per_user: usize,
    #[arg(long = "sample-rate", default_value_t = 48_000)]
    sample_rate: u32,
    /// DAW backend: mock or osc-out.
    #[arg(long, default_value = "mock")]
    backend: String,
    /// host:port of an AbletonOSC listener, for --backend osc-out.
    #[arg(long = "osc-out-target")]
    osc_out_target: Option<SocketAddr>,
    /// Write one WAV per user here on shutdown.
    #[arg(long = "export-dir")]
    export_dir: Option<PathBuf>,
    /// Directory served at the HTTP root, e.g. the built web panel.
    #[arg(long = "static-dir")]
    static_dir: Option<PathBuf>,
    /// Feed each user a test tone instead of silence.
    #[arg(long = "synthetic-input")]
    synthetic_input: bool,
}

#[tokio::main]
async fn main() -> Result<()> {
    let filter = EnvFilter::try_from_env("MRDAW_LOG").unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt().with_env_filter(filter).init();

    let cli = Cli::parse();
    let registry = BackendRegistry::with_builtins();
    if !registry.contains(&cli.backend) {
        let known: Vec<_> = registry.names().collect();
        bail!("unknown backend {:?}; choose one of {}", cli.backend, known.join(", "));
    }
    let config = ServerConfig {
        bind: cli.bind,
        osc_port: cli.osc_port,
        broadcast_port: cli.broadcast_port,
        ws_port: cli.ws_port,
        users: cli.users,
        tracks_per_user: cli.tracks_per_user,
        sample_rate: cli.sample_rate,
        backend: cli.backend,
        osc_out_target: cli.osc_out_target,
        export_dir: cli.export_dir,
        static_dir: cli.static_dir,
        synthetic_input: cli.synthetic_input,
        ..ServerConfig::default()
    };
    let server = start(config).await.context("starting server")?;
    println!("osc control on {}", server.osc_addr);
    println!("osc broadcast from {}", server.broadcast_addr);
    println!("panel at ws://{}/panel", server.ws_addr);

    tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
    let counters = server.counters();
    tracing::info!(?counters, "shutting down");
    match server.shutdown().await {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Err(err) => Err(err).context("shutdown"),
    }
}
