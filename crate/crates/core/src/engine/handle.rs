use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};

use super::protocol::{parse_line, AnalysisQuery, EngineLine};
use super::EngineError;

/// Whether the engine reports winrates and scores for the side to move or
/// always for Black.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Perspective {
    #[default]
    SideToMove,
    Black,
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    /// Human-readable engine name, recorded in cache metadata.
    pub engine_name: String,
    /// Network identifier; part of every cache key.
    pub network: String,
    pub handshake_timeout: Duration,
    /// Upper bound on the wait for any single response line.
    pub response_timeout: Option<Duration>,
    /// How long to keep listening for a query's remaining turns after a
    /// protocol error was routed to it.
    pub error_grace: Duration,
    /// Maximum number of queries in flight at once.
    pub max_pending: usize,
    pub perspective: Perspective,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            engine_name: "engine".into(),
            network: "unknown".into(),
            handshake_timeout: Duration::from_secs(60),
            response_timeout: None,
            error_grace: Duration::from_secs(2),
            max_pending: 8,
            perspective: Perspective::SideToMove,
        }
    }
}

pub(crate) enum Event {
    Line(EngineLine, String),
    Protocol(EngineError),
    Closed,
}

struct PendingQuery {
    seq: u64,
    tx: Sender<Event>,
}

#[derive(Default)]
struct Pending {
    queries: HashMap<String, PendingQuery>,
    next_seq: u64,
}

struct Inner {
    config: EngineConfig,
    writer: Mutex<Option<Sender<String>>>,
    pending: Mutex<Pending>,
    slots: Condvar,
    closed: AtomicBool,
    queries_sent: AtomicU64,
    next_id: AtomicU64,
    protocol_errors: Mutex<Vec<String>>,
    child: Mutex<Option<Child>>,
}

impl Inner {
    fn route(&self, id: Option<&str>, event: Event) {
        let pending = self.pending.lock().expect("pending lock");
        let target = match id {
            Some(id) => pending.queries.get(id),
            // Lines that cannot be attributed go to the oldest query in flight.
            None => pending.queries.values().min_by_key(|q| q.seq),
        };
        match target {
            Some(q) => {
                let _ = q.tx.send(event);
            }
            None => match event {
                Event::Line(EngineLine::Other(v), _) => debug!("engine: {v}"),
                Event::Line(_, raw) => warn!("unsolicited engine line: {raw}"),
                Event::Protocol(e) => warn!("{e}"),
                Event::Closed => {}
            },
        }
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        let pending = self.pending.lock().expect("pending lock");
        for q in pending.queries.values() {
            let _ = q.tx.send(Event::Closed);
        }
        drop(pending);
        self.slots.notify_all();
    }
}

/// A running analysis engine. Cloning shares the same underlying process;
/// any number of threads may submit queries concurrently.
#[derive(Clone)]
pub struct EngineHandle {
    inner: Arc<Inner>,
}

/// An in-flight query. Dropping it releases the query's pending slot.
pub(crate) struct Ticket {
    inner: Arc<Inner>,
    id: String,
    rx: Receiver<Event>,
}

impl Ticket {
    pub(crate) fn recv(&self, timeout: Option<Duration>) -> Result<Event, EngineError> {
        match timeout {
            None => self.rx.recv().map_err(|_| EngineError::Closed),
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => EngineError::Timeout(t),
                RecvTimeoutError::Disconnected => EngineError::Closed,
            }),
        }
    }
}

impl Drop for Ticket {
    fn drop(&mut self) {
        let mut pending = self.inner.pending.lock().expect("pending lock");
        pending.queries.remove(&self.id);
        drop(pending);
        self.inner.slots.notify_one();
    }
}

impl EngineHandle {
    /// Spawns `program args..` and performs the version handshake.
    pub fn start(program: &str, args: &[String], config: EngineConfig) -> Result<Self, EngineError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EngineError::SpawnFailure { command: program.to_string(), message: e.to_string() })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let handle = Self::from_io(BufReader::new(stdout), stdin, config);
        *handle.inner.child.lock().expect("child lock") = Some(child);
        let timeout = handle.inner.config.handshake_timeout;
        handle.probe(timeout)?;
        Ok(handle)
    }

    /// Wraps an arbitrary line transport. One thread owns `writer`, another
    /// owns `reader`; responses are delivered to waiting queries by id.
    pub fn from_io<R, W>(reader: R, writer: W, config: EngineConfig) -> Self
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel::<String>();
        let inner = Arc::new(Inner {
            config,
            writer: Mutex::new(Some(tx)),
            pending: Mutex::new(Pending::default()),
            slots: Condvar::new(),
            closed: AtomicBool::new(false),
            queries_sent: AtomicU64::new(0),
            next_id: AtomicU64::new(0),
            protocol_errors: Mutex::new(Vec::new()),
            child: Mutex::new(None),
        });

        let weak = Arc::downgrade(&inner);
        thread::Builder::new()
            .name("engine-writer".into())
            .spawn(move || {
                let mut writer = writer;
                for line in rx {
                    let ok = writer
                        .write_all(line.as_bytes())
                        .and_then(|_| writer.write_all(b"\n"))
                        .and_then(|_| writer.flush());
                    if let Err(e) = ok {
                        warn!("engine stdin: {e}");
                        if let Some(inner) = weak.upgrade() {
                            inner.close();
                        }
                        break;
                    }
                }
            })
            .expect("spawn writer thread");

        let weak = Arc::downgrade(&inner);
        thread::Builder::new()
            .name("engine-reader".into())
            .spawn(move || {
                let mut reader = reader;
                let mut buf = Vec::new();
                loop {
                    buf.clear();
                    match reader.read_until(b'\n', &mut buf) {
                        Ok(0) | Err(_) => break,
                        Ok(_) => {}
                    }
                    let Some(inner) = weak.upgrade() else { break };
                    let raw = String::from_utf8_lossy(&buf);
                    let line = raw.trim();
                    if line.is_empty() {
                        continue;
                    }
                    match parse_line(line) {
                        Ok((id, parsed)) => inner.route(id.as_deref(), Event::Line(parsed, line.to_string())),
                        Err((id, err)) => {
                            inner.protocol_errors.lock().expect("errors lock").push(line.to_string());
                            inner.route(id.as_deref(), Event::Protocol(err));
                        }
                    }
                }
                if let Some(inner) = weak.upgrade() {
                    inner.close();
                }
            })
            .expect("spawn reader thread");

        EngineHandle { inner }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.inner.config
    }

    /// Number of analysis queries written to the engine so far.
    pub fn queries_sent(&self) -> u64 {
        self.inner.queries_sent.load(Ordering::SeqCst)
    }

    /// Raw lines that failed to parse as protocol messages.
    pub fn protocol_errors(&self) -> Vec<String> {
        self.inner.protocol_errors.lock().expect("errors lock").clone()
    }

    pub fn is_closed(&self) -> bool {
        self.inner.closed.load(Ordering::SeqCst)
    }

    pub(crate) fn fresh_id(&self, prefix: &str) -> String {
        let n = self.inner.next_id.fetch_add(1, Ordering::SeqCst);
        format!("{prefix}-{n}")
    }

    fn send_line(&self, id: &str, line: String) -> Result<Ticket, EngineError> {
        let (tx, rx) = mpsc::channel();
        {
            let mut pending = self.inner.pending.lock().expect("pending lock");
            loop {
                if self.is_closed() {
                    return Err(EngineError::Closed);
                }
                if pending.queries.len() < self.inner.config.max_pending.max(1) {
                    break;
                }
                pending = self.inner.slots.wait(pending).expect("pending lock");
            }
            let seq = pending.next_seq;
            pending.next_seq += 1;
            pending.queries.insert(id.to_string(), PendingQuery { seq, tx });
        }
        let ticket = Ticket { inner: self.inner.clone(), id: id.to_string(), rx };
        let writer = self.inner.writer.lock().expect("writer lock");
        match writer.as_ref() {
            Some(w) if w.send(line).is_ok() => Ok(ticket),
            _ => Err(EngineError::Closed),
        }
    }

    /// Submits a query, blocking while `max_pending` queries are in flight.
    pub(crate) fn submit(&self, query: &AnalysisQuery) -> Result<Ticket, EngineError> {
        let line = serde_json::to_string(query).expect("query serializes");
        let ticket = self.send_line(&query.id, line)?;
        self.inner.queries_sent.fetch_add(1, Ordering::SeqCst);
        Ok(ticket)
    }

    /// Sends a version query and waits for any answer carrying its id.
    pub fn probe(&self, timeout: Duration) -> Result<(), EngineError> {
        let id = self.fresh_id("probe");
        let line = serde_json::json!({"id": id, "action": "query_version"}).to_string();
        let ticket = self.send_line(&id, line)?;
        match ticket.recv(Some(timeout)) {
            Ok(Event::Line(..)) => Ok(()),
            Ok(Event::Protocol(e)) => Err(e),
            Ok(Event::Closed) | Err(EngineError::Closed) => Err(EngineError::Closed),
            Err(EngineError::Timeout(_)) => Err(EngineError::HandshakeTimeout(timeout)),
            Err(e) => Err(e),
        }
    }

    /// Closes the engine's input and waits for the child, if any, to exit.
    pub fn shutdown(&self) {
        self.inner.writer.lock().expect("writer lock").take();
        if let Some(mut child) = self.inner.child.lock().expect("child lock").take() {
            for _ in 0..50 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(20));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Drop for Inner {
    fn drop(&mut self) {
        self.writer.get_mut().map(|w| w.take()).ok();
        if let Ok(slot) = self.child.get_mut() {
            if let Some(mut child) = slot.take() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}
