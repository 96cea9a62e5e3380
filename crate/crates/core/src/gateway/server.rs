//! WebSocket server.
//!
//! Threads: one acceptor, one per connection for socket I/O, and one owner
//! thread that holds the [`App`]. Connection threads never touch the app;
//! they forward decoded messages over a command channel and write whatever
//! the owner hands back.

use super::app::{App, AppOptions, DEFAULT_LIVE_STEPS};
use super::wire::{decode, encode, WireMessage, PROTOCOL_VERSION};
use super::{GatewayError, ServerConfig};
use crate::engine::{Clock, RealClock};
use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};
use tungstenite::{Message, Utf8Bytes, WebSocket};

const OWNER_TICK: Duration = Duration::from_millis(2);
const READ_POLL: Duration = Duration::from_millis(5);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
/// Wall-clock milliseconds per kinetics step in live mode (dt = 0.005).
const LIVE_STEP_MS: f64 = 5.0;

enum Command {
    Connect { id: u64, tx: Sender<Utf8Bytes> },
    Incoming { id: u64, msg: WireMessage },
    Disconnect { id: u64 },
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    owner: Option<JoinHandle<()>>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, closes connections and joins all threads.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.join_threads();
    }

    /// Blocks until the server stops.
    pub fn join(mut self) {
        self.join_threads();
    }

    fn join_threads(&mut self) {
        for h in [self.acceptor.take(), self.owner.take()].into_iter().flatten() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.join_threads();
    }
}

/// Runs the server until it is shut down.
pub fn serve(config: &ServerConfig) -> Result<(), GatewayError> {
    let handle = spawn(config)?;
    log::info!("listening on ws://{}", handle.local_addr());
    handle.join();
    Ok(())
}

/// Binds and starts the server threads. Port 0 picks a free port.
pub fn spawn(config: &ServerConfig) -> Result<ServerHandle, GatewayError> {
    config.validate()?;
    let listener = TcpListener::bind((config.host.as_str(), config.port))?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let stop = Arc::new(AtomicBool::new(false));
    let (cmd_tx, cmd_rx) = mpsc::channel();

    let options = AppOptions {
        demo: config.demo,
        seed: config.seed_or_default(),
        grid_m: config.grid_m,
        particles: config.particles,
        refresh_ms: config.refresh_ms as f64,
        max_steps: Some(config.steps.unwrap_or(DEFAULT_LIVE_STEPS)),
        pace_ms: Some(LIVE_STEP_MS),
        clock: Arc::new(RealClock::new()) as Arc<dyn Clock>,
    };
    let (ready_tx, ready_rx) = mpsc::sync_channel(1);
    let owner_stop = Arc::clone(&stop);
    let owner = thread::Builder::new().name("mdi-owner".into()).spawn(move || {
        let mut app = match App::new(options) {
            Ok(app) => app,
            Err(e) => {
                let _ = ready_tx.send(Err(e));
                return;
            }
        };
        if app.engine().has_simulation() {
            if let Err(e) = app.engine().start() {
                log::warn!("simulation did not start: {e}");
            }
        }
        let _ = ready_tx.send(Ok(()));
        run_owner(&mut app, cmd_rx, &owner_stop);
    })?;
    match ready_rx.recv() {
        Ok(Ok(())) => {}
        Ok(Err(e)) => {
            let _ = owner.join();
            return Err(e);
        }
        Err(_) => {
            let _ = owner.join();
            return Err(GatewayError::Unsupported("owner thread exited during startup".into()));
        }
    }

    let accept_stop = Arc::clone(&stop);
    let acceptor = thread::Builder::new()
        .name("mdi-accept".into())
        .spawn(move || run_acceptor(listener, cmd_tx, &accept_stop))?;
    Ok(ServerHandle {
        addr,
        stop,
        owner: Some(owner),
        acceptor: Some(acceptor),
    })
}

fn run_owner(app: &mut App, rx: Receiver<Command>, stop: &AtomicBool) {
    let origin = Instant::now();
    let mut conns: BTreeMap<u64, Sender<Utf8Bytes>> = BTreeMap::new();
    let send = |conns: &mut BTreeMap<u64, Sender<Utf8Bytes>>, id: u64, msg: &WireMessage| {
        if let Some(tx) = conns.get(&id) {
            if tx.send(Utf8Bytes::from(encode(msg))).is_err() {
                conns.remove(&id);
            }
        }
    };
    let mut last_pump = Instant::now() - OWNER_TICK;
    while !stop.load(Ordering::SeqCst) {
        let wait = OWNER_TICK.saturating_sub(last_pump.elapsed());
        let first = match rx.recv_timeout(wait) {
            Ok(cmd) => Some(cmd),
            Err(RecvTimeoutError::Timeout) => None,
            Err(RecvTimeoutError::Disconnected) => break,
        };
        for cmd in first.into_iter().chain(rx.try_iter()) {
            match cmd {
                Command::Connect { id, tx } => {
                    conns.insert(id, tx);
                    send(&mut conns, id, &WireMessage::hello());
                    send(&mut conns, id, &app.view_list());
                    for frame in app.latest_frames() {
                        send(&mut conns, id, &frame);
                    }
                }
                Command::Incoming { id, msg } => {
                    for reply in app.handle_message(&msg) {
                        send(&mut conns, id, &reply);
                    }
                }
                Command::Disconnect { id } => {
                    conns.remove(&id);
                }
            }
        }
        if last_pump.elapsed() >= OWNER_TICK {
            last_pump = Instant::now();
            let now_ms = origin.elapsed().as_secs_f64() * 1000.0;
            match app.pump(now_ms) {
                Ok(out) => {
                    for msg in out {
                        let text = Utf8Bytes::from(encode(&msg));
                        conns.retain(|_, tx| tx.send(text.clone()).is_ok());
                    }
                }
                Err(e) => log::error!("pump failed: {e}"),
            }
        }
    }
    let _ = app.engine().cancel();
}

fn run_acceptor(listener: TcpListener, cmd_tx: Sender<Command>, stop: &Arc<AtomicBool>) {
    let next_id = AtomicU64::new(1);
    let workers: Mutex<Vec<JoinHandle<()>>> = Mutex::new(Vec::new());
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id.fetch_add(1, Ordering::Relaxed);
                let tx = cmd_tx.clone();
                let stop = Arc::clone(stop);
                log::debug!("connection {id} from {peer}");
                let spawned = thread::Builder::new()
                    .name(format!("mdi-conn-{id}"))
                    .spawn(move || {
                        if let Err(e) = run_connection(stream, id, &tx, &stop) {
                            log::debug!("connection {id} ended: {e}");
                        }
                        let _ = tx.send(Command::Disconnect { id });
                    });
                match spawned {
                    Ok(h) => workers.lock().unwrap_or_else(|e| e.into_inner()).push(h),
                    Err(e) => log::error!("could not spawn connection thread: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(10));
            }
        }
    }
    for h in workers.into_inner().unwrap_or_else(|e| e.into_inner()) {
        let _ = h.join();
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn send_now(ws: &mut WebSocket<TcpStream>, msg: &WireMessage) -> Result<(), tungstenite::Error> {
    ws.send(Message::text(encode(msg)))
}

/// Waits for the client's hello. Anything else, or a version mismatch,
/// gets an error reply and the connection is refused.
fn handshake(ws: &mut WebSocket<TcpStream>) -> Result<(), GatewayError> {
    let refuse = |ws: &mut WebSocket<TcpStream>, err: GatewayError| {
        let _ = send_now(ws, &WireMessage::error(err.code(), err.to_string()));
        let _ = ws.close(None);
        let _ = ws.flush();
        err
    };
    let first = loop {
        match ws.read() {
            Ok(Message::Text(text)) => break text,
            Ok(Message::Binary(bytes)) => break Utf8Bytes::try_from(bytes).unwrap_or_default(),
            Ok(Message::Close(_)) => return Err(GatewayError::Unsupported("closed before hello".into())),
            Ok(_) => continue,
            Err(e) => return Err(GatewayError::Unsupported(format!("handshake failed: {e}"))),
        }
    };
    match decode(first.as_bytes()) {
        Ok(WireMessage::Hello { protocol_version }) if protocol_version == PROTOCOL_VERSION => Ok(()),
        Ok(WireMessage::Hello { protocol_version }) => Err(refuse(
            ws,
            GatewayError::VersionMismatch {
                expected: PROTOCOL_VERSION,
                got: protocol_version,
            },
        )),
        Ok(_) => Err(refuse(ws, GatewayError::InvalidInput("expected hello".into()))),
        Err(e) => Err(refuse(ws, e)),
    }
}

fn run_connection(
    stream: TcpStream,
    id: u64,
    cmd_tx: &Sender<Command>,
    stop: &AtomicBool,
) -> Result<(), GatewayError> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let mut ws = tungstenite::accept(stream).map_err(|e| GatewayError::Unsupported(format!("upgrade failed: {e}")))?;
    handshake(&mut ws)?;
    ws.get_ref().set_read_timeout(Some(READ_POLL))?;

    let (tx, rx) = mpsc::channel();
    if cmd_tx.send(Command::Connect { id, tx }).is_err() {
        return Ok(());
    }
    let ws_err = |e: tungstenite::Error| GatewayError::Unsupported(format!("socket error: {e}"));
    loop {
        if stop.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        loop {
            match rx.try_recv() {
                Ok(text) => ws.send(Message::Text(text)).map_err(ws_err)?,
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => return Ok(()),
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => forward(&mut ws, id, cmd_tx, text.as_bytes()).map_err(ws_err)?,
            Ok(Message::Binary(bytes)) => forward(&mut ws, id, cmd_tx, &bytes).map_err(ws_err)?,
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(ws_err(e)),
        }
    }
}

/// Malformed input is answered on this connection; it stays open.
fn forward(ws: &mut WebSocket<TcpStream>, id: u64, cmd_tx: &Sender<Command>, bytes: &[u8]) -> Result<(), tungstenite::Error> {
    match decode(bytes) {
        Ok(msg) => {
            let _ = cmd_tx.send(Command::Incoming { id, msg });
            Ok(())
        }
        Err(e) => send_now(ws, &WireMessage::error(e.code(), e.to_string())),
    }
}
