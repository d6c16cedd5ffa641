//! The gateway: one driver endpoint for session control and one endpoint per
//! worker for matrix data.
//!
//! The driver listens on `start_port` and worker `k` on `start_port + 1 + k`.
//! Clients handshake with the driver, request a group of workers, then send
//! and fetch blocks directly on the worker endpoints. Each worker owns its
//! matrix store; library tasks reach it only through [`TaskContext`].

mod driver;
mod log;
mod state;
mod task;
mod worker;

use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

pub use self::log::{CommandLog, Endpoint, LogEntry};
pub use state::{DriverState, Session};
pub use task::{Library, TaskContext};
pub use worker::Worker;

use crate::error::{Error, Result};
use crate::protocol::{read_frame, write_frame, ErrorReply, Frame, Wire, WorkerInfo, DEFAULT_BUFFER_BYTES, MIN_BUFFER_BYTES};

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub num_workers: usize,
    pub start_port: u16,
    /// Address to bind and to advertise to clients.
    pub host: String,
    /// Largest buffer a session may negotiate.
    pub max_buffer_bytes: usize,
    pub log_path: Option<PathBuf>,
    /// Receives `host:port` of the driver once it is listening.
    pub address_file: Option<PathBuf>,
    /// Keep every logged command in memory for inspection.
    pub record_commands: bool,
}

impl GatewayConfig {
    pub fn new(num_workers: usize, start_port: u16) -> Self {
        Self {
            num_workers,
            start_port,
            host: "127.0.0.1".into(),
            max_buffer_bytes: DEFAULT_BUFFER_BYTES,
            log_path: None,
            address_file: None,
            record_commands: false,
        }
    }
}

pub(crate) struct Shared {
    pub(crate) config: GatewayConfig,
    pub(crate) state: Mutex<DriverState>,
    pub(crate) workers: Vec<Arc<Worker>>,
    pub(crate) log: CommandLog,
    pub(crate) next_handle: AtomicU64,
    shutdown: AtomicBool,
    conns: Mutex<HashMap<u64, TcpStream>>,
    next_conn: AtomicU64,
}

impl Shared {
    pub(crate) fn state(&self) -> MutexGuard<'_, DriverState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn worker_info(&self, rank: usize) -> WorkerInfo {
        let w = &self.workers[rank];
        WorkerInfo { rank: rank as u32, host: w.host().to_owned(), port: w.port() }
    }
}

/// A running gateway. Dropping it stops the listeners and closes open
/// connections.
pub struct Gateway {
    shared: Arc<Shared>,
    driver_addr: SocketAddr,
    acceptors: Vec<JoinHandle<()>>,
}

fn bind(host: &str, port: u16) -> Result<TcpListener> {
    let addr = (host, port)
        .to_socket_addrs()
        .map_err(|e| Error::Bind { port, source: e })?
        .next()
        .ok_or_else(|| Error::Bind { port, source: std::io::Error::other(format!("{host} does not resolve")) })?;
    TcpListener::bind(addr).map_err(|e| Error::Bind { port, source: e })
}

impl Gateway {
    /// Binds the driver and every worker port, failing on the first port
    /// that is unavailable.
    pub fn start(config: GatewayConfig) -> Result<Gateway> {
        if config.num_workers == 0 {
            return Err(Error::InvalidArgument("need at least one worker".into()));
        }
        if config.start_port == 0 {
            return Err(Error::InvalidArgument("start port must be non-zero".into()));
        }
        if config.start_port as usize + config.num_workers > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "ports {}..={} exceed the port range",
                config.start_port,
                config.start_port as usize + config.num_workers
            )));
        }
        if config.max_buffer_bytes < MIN_BUFFER_BYTES {
            return Err(Error::InvalidBuffer(format!("maximum buffer must be at least {MIN_BUFFER_BYTES} bytes")));
        }

        let driver = bind(&config.host, config.start_port)?;
        let mut worker_listeners = Vec::with_capacity(config.num_workers);
        for k in 0..config.num_workers {
            worker_listeners.push(bind(&config.host, config.start_port + 1 + k as u16)?);
        }
        let driver_addr = driver.local_addr()?;

        let log = CommandLog::open(config.log_path.as_deref(), config.record_commands)?;
        let workers = (0..config.num_workers)
            .map(|k| Arc::new(Worker::new(k, config.host.clone(), config.start_port + 1 + k as u16)))
            .collect();
        let shared = Arc::new(Shared {
            state: Mutex::new(DriverState::new(config.num_workers)),
            workers,
            log,
            next_handle: AtomicU64::new(1),
            shutdown: AtomicBool::new(false),
            conns: Mutex::new(HashMap::new()),
            next_conn: AtomicU64::new(0),
            config,
        });

        for line in banner(&shared) {
            shared.log.line(&line);
            ::log::info!("{line}");
        }
        if let Some(path) = &shared.config.address_file {
            fs::write(path, format!("{}:{}\n", shared.config.host, shared.config.start_port))?;
        }

        let mut acceptors = vec![spawn_acceptor(shared.clone(), driver, Endpoint::Driver)];
        for (k, l) in worker_listeners.into_iter().enumerate() {
            acceptors.push(spawn_acceptor(shared.clone(), l, Endpoint::Worker(k)));
        }
        Ok(Gateway { shared, driver_addr, acceptors })
    }

    /// Starts on the first free block of `num_workers + 1` consecutive
    /// ports, ignoring `config.start_port`.
    pub fn start_any(mut config: GatewayConfig) -> Result<Gateway> {
        let span = config.num_workers as u32 + 1;
        let mut seed = std::process::id().wrapping_mul(2654435761) ^ (std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.subsec_nanos())
            .unwrap_or(0));
        let mut last = None;
        for _ in 0..200 {
            seed = seed.wrapping_mul(1103515245).wrapping_add(12345);
            let base = 20000 + (seed >> 8) % (40000 - span);
            config.start_port = base as u16;
            match Gateway::start(config.clone()) {
                Err(e @ Error::Bind { .. }) => last = Some(e),
                other => return other,
            }
        }
        Err(last.unwrap_or_else(|| Error::Internal("no free port range".into())))
    }

    /// Startup lines naming the driver and every worker endpoint. They are
    /// written to the log file, if any, when the gateway starts.
    pub fn banner(&self) -> Vec<String> {
        banner(&self.shared)
    }

    pub fn driver_addr(&self) -> SocketAddr {
        self.driver_addr
    }

    pub fn host(&self) -> &str {
        &self.shared.config.host
    }

    pub fn port(&self) -> u16 {
        self.shared.config.start_port
    }

    pub fn workers(&self) -> Vec<WorkerInfo> {
        (0..self.shared.workers.len()).map(|k| self.shared.worker_info(k)).collect()
    }

    pub fn free_workers(&self) -> usize {
        self.shared.state().free_workers()
    }

    pub fn live_sessions(&self) -> usize {
        self.shared.state().live_sessions()
    }

    pub fn pool_is_consistent(&self) -> bool {
        self.shared.state().pool_is_consistent()
    }

    /// Matrices stored on worker `rank`, over all sessions.
    pub fn stored_matrices(&self, rank: usize) -> usize {
        self.shared.workers[rank].entry_count()
    }

    pub fn command_log(&self) -> Vec<LogEntry> {
        self.shared.log.entries()
    }

    /// Blocks until the gateway is shut down from another thread.
    pub fn wait(mut self) {
        for h in self.acceptors.drain(..) {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.shared.shutdown.swap(true, Ordering::SeqCst) {
            return;
        }
        // wake each acceptor with a throwaway connection
        let host = self.shared.config.host.clone();
        for k in 0..=self.shared.workers.len() {
            let port = self.shared.config.start_port + k as u16;
            let _ = TcpStream::connect((host.as_str(), port));
        }
        for h in self.acceptors.drain(..) {
            let _ = h.join();
        }
        let conns = std::mem::take(&mut *self.shared.conns.lock().unwrap_or_else(|e| e.into_inner()));
        for (_, s) in conns {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.stop();
    }
}

fn banner(shared: &Shared) -> Vec<String> {
    let mut lines = vec![format!("alchemist driver listening on {}:{}", shared.config.host, shared.config.start_port)];
    for k in 0..shared.config.num_workers {
        lines.push(format!("alchemist worker {k} listening on {}", shared.worker_info(k).address()));
    }
    lines
}

fn spawn_acceptor(shared: Arc<Shared>, listener: TcpListener, endpoint: Endpoint) -> JoinHandle<()> {
    std::thread::Builder::new()
        .name(format!("{endpoint}-accept"))
        .spawn(move || {
            for stream in listener.incoming() {
                if shared.shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let shared = shared.clone();
                let _ = std::thread::Builder::new()
                    .name(format!("{endpoint}-conn"))
                    .spawn(move || serve(shared, endpoint, stream));
            }
        })
        .expect("spawn acceptor thread")
}

/// Writes an `ERROR` frame for `err`.
pub(crate) fn send_error<W: Write>(w: &mut W, session_id: u64, err: &Error, buffer_bytes: usize) -> Result<()> {
    let mut reply = ErrorReply::from_error(err);
    // keep the reply within the buffer whatever the message length
    let room = crate::protocol::max_payload(buffer_bytes).saturating_sub(6);
    if reply.message.len() > room {
        let mut cut = room;
        while !reply.message.is_char_boundary(cut) {
            cut -= 1;
        }
        reply.message.truncate(cut);
    }
    write_frame(w, &Frame::new(crate::protocol::Command::Error, session_id, reply.to_payload()), buffer_bytes)?;
    Ok(())
}

fn serve(shared: Arc<Shared>, endpoint: Endpoint, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let conn_id = shared.next_conn.fetch_add(1, Ordering::Relaxed);
    let Ok(read_half) = stream.try_clone() else { return };
    if let Ok(s) = stream.try_clone() {
        shared.conns.lock().unwrap_or_else(|e| e.into_inner()).insert(conn_id, s);
    }
    let mut reader = BufReader::with_capacity(1 << 16, read_half);
    let mut writer = BufWriter::with_capacity(1 << 16, stream);
    let max = shared.config.max_buffer_bytes;
    loop {
        let frame = match read_frame(&mut reader, max) {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(Error::Io(_)) => break,
            Err(e) => {
                // the stream cannot be resynchronised after a bad header
                let _ = send_error(&mut writer, 0, &e, max);
                break;
            }
        };
        shared.log.command(endpoint, frame.session_id, frame.command);
        let session_id = frame.session_id;
        let result = match endpoint {
            Endpoint::Driver => driver::handle_driver(&shared, frame, &mut writer),
            Endpoint::Worker(rank) => driver::handle_worker(&shared, rank, frame, &mut writer),
        };
        match result {
            Ok(()) => {}
            Err(Error::Io(_)) => break,
            Err(e) => {
                let buffer = shared.state().session(session_id).map(|s| s.buffer_bytes).unwrap_or(max);
                if send_error(&mut writer, session_id, &e, buffer).is_err() {
                    break;
                }
            }
        }
    }
    shared.conns.lock().unwrap_or_else(|e| e.into_inner()).remove(&conn_id);
}
