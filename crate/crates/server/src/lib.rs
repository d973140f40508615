//! The live loop-session service.
//!
//! [`start`] binds the OSC control port, the OSC broadcast port and the
//! HTTP/WebSocket port, spawns the control loop and returns a
//! [`RunningServer`] handle.

pub mod config;
pub mod control;
pub mod osc_io;
pub mod panel;
pub mod registry;
pub mod ws;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;

use mrdaw_core::daw::BackendError;
use mrdaw_core::session::ConfigError;
use mrdaw_core::wav::ExportError;
use mrdaw_core::{BackendOptions, BackendRegistry, SessionConfig, SessionHost, Snapshot};
use thiserror::Error;
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::{oneshot, watch};
use tokio::task::AbortHandle;
use tracing::info;

pub use config::ServerConfig;
pub use control::{CounterValues, Counters, Inbound};
pub use panel::PanelMessage;
pub use registry::{ClientKind, ClientRegistry};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {what} on {addr}: {source}")]
    Bind { what: &'static str, addr: SocketAddr, source: std::io::Error },
    #[error("invalid session: {0}")]
    Config(#[from] ConfigError),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("control loop is not running")]
    Stopped,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// State shared by the network tasks. None of it is session state: they
/// only enqueue events for the control loop.
pub struct Shared {
    pub control: mpsc::Sender<Inbound>,
    pub counters: Arc<Counters>,
    pub registry: Arc<ClientRegistry>,
    pub session: SessionConfig,
}

pub struct RunningServer {
    pub osc_addr: SocketAddr,
    pub broadcast_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    shared: Arc<Shared>,
    snapshots: watch::Receiver<Snapshot>,
    control: Option<JoinHandle<SessionHost>>,
    tasks: Vec<AbortHandle>,
    export_dir: Option<PathBuf>,
}

async fn bind_udp(what: &'static str, addr: SocketAddr) -> Result<UdpSocket, ServerError> {
    UdpSocket::bind(addr).await.map_err(|source| ServerError::Bind { what, addr, source })
}

/// Starts the service on the current tokio runtime.
pub async fn start(config: ServerConfig) -> Result<RunningServer, ServerError> {
    let session = config.session();
    session.validate()?;
    let backends = BackendRegistry::with_builtins();
    let backend = backends.create(
        &config.backend,
        &BackendOptions { session: session.clone(), osc_out_target: config.osc_out_target },
    )?;
    let host = SessionHost::new(session.clone(), backend)?;

    let osc = bind_udp("OSC control port", SocketAddr::new(config.bind, config.osc_port)).await?;
    let bcast = bind_udp("OSC broadcast port", SocketAddr::new(config.bind, config.broadcast_port)).await?;
    let ws_bind = SocketAddr::new(config.bind, config.ws_port);
    let listener =
        TcpListener::bind(ws_bind).await.map_err(|source| ServerError::Bind { what: "WebSocket port", addr: ws_bind, source })?;
    let osc_addr = osc.local_addr()?;
    let broadcast_addr = bcast.local_addr()?;
    let ws_addr = listener.local_addr()?;

    let (control_tx, control_rx) = mpsc::channel();
    let (snap_tx, snap_rx) = watch::channel(Snapshot { seq: 0, view: host.view() });
    let counters = Arc::new(Counters::default());
    let shared = Arc::new(Shared {
        control: control_tx,
        counters: counters.clone(),
        registry: Arc::new(ClientRegistry::new(config.client_timeout)),
        session,
    });

    let control = control::ControlLoop {
        host,
        inbound: control_rx,
        snapshots: snap_tx,
        counters,
        broadcast_interval: config.broadcast_interval,
        synthetic_input: config.synthetic_input,
    }
    .spawn()?;

    let mut tasks = Vec::new();
    tasks.push(tokio::spawn(osc_io::intake(Arc::new(osc), shared.clone())).abort_handle());
    tasks.push(tokio::spawn(osc_io::broadcast(bcast, snap_rx.clone(), shared.clone())).abort_handle());
    let app = ws::router(shared.clone(), snap_rx.clone(), config.static_dir.clone())
        .into_make_service_with_connect_info::<SocketAddr>();
    tasks.push(
        tokio::spawn(async move {
            if let Err(err) = axum::serve(listener, app).await {
                tracing::error!(%err, "HTTP server stopped");
            }
        })
        .abort_handle(),
    );

    info!(%osc_addr, %broadcast_addr, %ws_addr, backend = %config.backend, "server started");
    Ok(RunningServer {
        osc_addr,
        broadcast_addr,
        ws_addr,
        shared,
        snapshots: snap_rx,
        control: Some(control),
        tasks,
        export_dir: config.export_dir,
    })
}

impl RunningServer {
    pub fn counters(&self) -> CounterValues {
        self.shared.counters.values()
    }

    pub fn registry(&self) -> &ClientRegistry {
        &self.shared.registry
    }

    /// The latest published snapshot.
    pub fn snapshot(&self) -> Snapshot {
        self.snapshots.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Snapshot> {
        self.snapshots.clone()
    }

    /// One loop period per user as `dir/{prefix}-user{N}.wav`.
    pub async fn export(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>, ServerError> {
        let (reply, rx) = oneshot::channel();
        self.shared
            .control
            .send(Inbound::Export { dir: dir.to_path_buf(), prefix: prefix.to_string(), reply })
            .map_err(|_| ServerError::Stopped)?;
        Ok(rx.await.map_err(|_| ServerError::Stopped)??)
    }

    /// Stops every task and, with an export directory configured, writes
    /// the session's WAV files. Returns the files written.
    pub async fn shutdown(mut self) -> Result<Vec<PathBuf>, ServerError> {
        for task in self.tasks.drain(..) {
            task.abort();
        }
        let _ = self.shared.control.send(Inbound::Shutdown);
        let handle = self.control.take().ok_or(ServerError::Stopped)?;
        let host = tokio::task::spawn_blocking(move || handle.join())
            .await
            .map_err(|_| ServerError::Stopped)?
            .map_err(|_| ServerError::Stopped)?;
        match &self.export_dir {
            Some(dir) => {
                let files = mrdaw_core::wav::export_session(host.state(), host.loops(), dir, "session")?;
                info!(count = files.len(), dir = %dir.display(), "exported session");
                Ok(files)
            }
            None => Ok(Vec::new()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        for task in &self.tasks {
            task.abort();
        }
        let _ = self.shared.control.send(Inbound::Shutdown);
    }
}
