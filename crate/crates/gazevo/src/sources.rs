//! Where gaze samples come from.
//!
//! Every source is polled once per engine tick and returns whatever samples
//! arrived since the previous poll. Exactly one source feeds a session.

use std::collections::VecDeque;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use gazevo_core::classify::{AttributeSummary, Target};
use gazevo_core::gaze::{GazeSample, GridLayout, PolicyParams, SyntheticPolicy};
use serde::{Deserialize, Serialize};

use crate::tracker::{parse_tracker_record, StreamStats};

/// Samples buffered between polls before the oldest are discarded.
pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

/// Commands asking a tracker to start streaming fixation data.
const TRACKER_ENABLE: &[u8] =
    b"<SET ID=\"ENABLE_SEND_POG_FIX\" STATE=\"1\" />\r\n<SET ID=\"ENABLE_SEND_DATA\" STATE=\"1\" />\r\n";

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("cannot connect to tracker at {address}: {reason}")]
    ConnectionFailed { address: String, reason: String },
    #[error("gaze log {0} not found")]
    FileNotFound(PathBuf),
    #[error("gaze stream ended")]
    StreamEnded,
    #[error("gaze log line {line}: {reason}")]
    BadLogLine { line: usize, reason: String },
    #[error("bad gaze source descriptor {0:?}")]
    BadDescriptor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What the engine knows when it polls a source.
#[derive(Debug, Clone, Copy)]
pub struct PollContext<'a> {
    pub now_ms: f64,
    pub summaries: &'a [AttributeSummary],
    pub layout: &'a GridLayout,
}

pub trait GazeSource: Send {
    /// Samples that arrived since the last poll, oldest first.
    fn poll(&mut self, ctx: &PollContext<'_>) -> Result<Vec<GazeSample>, SourceError>;

    fn stats(&self) -> StreamStats {
        StreamStats::default()
    }
}

/// A FIFO that discards its oldest entries when full.
#[derive(Debug)]
pub struct BoundedQueue<T> {
    items: VecDeque<T>,
    capacity: usize,
    dropped: u64,
}

impl<T> BoundedQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        BoundedQueue { items: VecDeque::with_capacity(capacity), capacity, dropped: 0 }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
            self.dropped += 1;
        }
        self.items.push_back(item);
    }

    pub fn drain(&mut self) -> Vec<T> {
        self.items.drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

#[derive(Debug)]
struct TrackerShared {
    queue: BoundedQueue<GazeSample>,
    stats: StreamStats,
}

/// A tracker streaming `<REC …/>` lines over TCP, read on a background thread.
#[derive(Debug)]
pub struct NetworkTracker {
    shared: Arc<Mutex<TrackerShared>>,
    ended: Arc<AtomicBool>,
}

impl NetworkTracker {
    pub fn connect(address: &str, timeout: Duration) -> Result<Self, SourceError> {
        let failed = |reason: String| SourceError::ConnectionFailed { address: address.to_string(), reason };
        let addrs: Vec<_> = address.to_socket_addrs().map_err(|e| failed(e.to_string()))?.collect();
        let mut last = String::from("no addresses resolved");
        let stream = addrs
            .iter()
            .find_map(|a| TcpStream::connect_timeout(a, timeout).map_err(|e| last = e.to_string()).ok())
            .ok_or_else(|| failed(last))?;
        let mut writer = stream.try_clone()?;
        // trackers that stream unconditionally simply ignore these
        let _ = writer.write_all(TRACKER_ENABLE);

        let shared = Arc::new(Mutex::new(TrackerShared {
            queue: BoundedQueue::new(DEFAULT_QUEUE_CAPACITY),
            stats: StreamStats::default(),
        }));
        let ended = Arc::new(AtomicBool::new(false));
        let (s, e) = (Arc::clone(&shared), Arc::clone(&ended));
        thread::spawn(move || {
            let mut reader = BufReader::new(stream);
            let mut line = Vec::new();
            loop {
                line.clear();
                match reader.read_until(b'\n', &mut line) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {}
                }
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                let mut guard = s.lock().expect("tracker lock");
                match parse_tracker_record(&line) {
                    Ok(sample) => {
                        guard.stats.records += 1;
                        guard.stats.invalid += u64::from(!sample.valid);
                        guard.queue.push(sample);
                    }
                    Err(_) => guard.stats.malformed += 1,
                }
            }
            e.store(true, Ordering::SeqCst);
        });
        Ok(NetworkTracker { shared, ended })
    }
}

impl GazeSource for NetworkTracker {
    fn poll(&mut self, _ctx: &PollContext<'_>) -> Result<Vec<GazeSample>, SourceError> {
        // read the flag first so samples queued just before EOF are not lost
        let ended = self.ended.load(Ordering::SeqCst);
        let samples = self.shared.lock().expect("tracker lock").queue.drain();
        if samples.is_empty() && ended {
            return Err(SourceError::StreamEnded);
        }
        Ok(samples)
    }

    fn stats(&self) -> StreamStats {
        let guard = self.shared.lock().expect("tracker lock");
        StreamStats { dropped: guard.queue.dropped(), ..guard.stats }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayPace {
    /// One sample per poll, regardless of the clock.
    MaxSpeed,
    /// Samples are released when their offset from the first sample has
    /// elapsed on the engine clock.
    RealTime,
}

/// A recorded gaze log: one JSON [`GazeSample`] per line.
#[derive(Debug, Clone)]
pub struct Replay {
    samples: VecDeque<GazeSample>,
    pace: ReplayPace,
    origin: Option<(f64, f64)>,
}

impl Replay {
    pub fn open(path: &Path, pace: ReplayPace) -> Result<Self, SourceError> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SourceError::FileNotFound(path.to_path_buf()),
            _ => SourceError::Io(e),
        })?;
        Self::parse(&text, pace)
    }

    pub fn parse(text: &str, pace: ReplayPace) -> Result<Self, SourceError> {
        let mut samples = VecDeque::new();
        let mut last_t = f64::NEG_INFINITY;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |reason: String| SourceError::BadLogLine { line: i + 1, reason };
            let s: GazeSample = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if s.t_ms < last_t {
                return Err(bad("timestamps go backwards".into()));
            }
            last_t = s.t_ms;
            samples.push_back(s);
        }
        Ok(Replay { samples, pace, origin: None })
    }

    pub fn remaining(&self) -> usize {
        self.samples.len()
    }
}

/// Serializes samples in the replay log format.
pub fn write_gaze_log(samples: &[GazeSample]) -> String {
    samples.iter().map(|s| serde_json::to_string(s).expect("plain data") + "\n").collect()
}

impl GazeSource for Replay {
    fn poll(&mut self, ctx: &PollContext<'_>) -> Result<Vec<GazeSample>, SourceError> {
        let Some(first) = self.samples.front() else {
            return Err(SourceError::StreamEnded);
        };
        match self.pace {
            ReplayPace::MaxSpeed => Ok(self.samples.pop_front().into_iter().collect()),
            ReplayPace::RealTime => {
                let (log0, clock0) = *self.origin.get_or_insert((first.t_ms, ctx.now_ms));
                let horizon = log0 + (ctx.now_ms - clock0);
                let mut out = Vec::new();
                while self.samples.front().is_some_and(|s| s.t_ms <= horizon) {
                    out.extend(self.samples.pop_front());
                }
                Ok(out)
            }
        }
    }
}

/// The UI pointer standing in for gaze; fed through a [`PointerHandle`].
///
/// A resting pointer produces no events but is still "looking", so a poll
/// with nothing new repeats the last known position.
#[derive(Debug)]
pub struct PointerProxy {
    queue: Arc<Mutex<BoundedQueue<GazeSample>>>,
    last: Option<GazeSample>,
}

/// The producing side of a [`PointerProxy`].
#[derive(Debug, Clone)]
pub struct PointerHandle {
    queue: Arc<Mutex<BoundedQueue<GazeSample>>>,
}

impl PointerProxy {
    pub fn new() -> (Self, PointerHandle) {
        let queue = Arc::new(Mutex::new(BoundedQueue::new(DEFAULT_QUEUE_CAPACITY)));
        (PointerProxy { queue: Arc::clone(&queue), last: None }, PointerHandle { queue })
    }
}

impl PointerHandle {
    /// Queues a pointer position; positions off the display are invalid.
    pub fn push(&self, t_ms: f64, x: f64, y: f64) {
        self.queue.lock().expect("pointer lock").push(GazeSample::new(t_ms, x, y));
    }

    /// Queues a "pointer left the display" event.
    pub fn leave(&self, t_ms: f64) {
        self.queue.lock().expect("pointer lock").push(GazeSample::invalid(t_ms));
    }
}

impl GazeSource for PointerProxy {
    fn poll(&mut self, ctx: &PollContext<'_>) -> Result<Vec<GazeSample>, SourceError> {
        let fresh = self.queue.lock().expect("pointer lock").drain();
        if let Some(latest) = fresh.last() {
            self.last = Some(*latest);
            return Ok(fresh);
        }
        Ok(self.last.map(|s| GazeSample { t_ms: ctx.now_ms, ..s }).into_iter().collect())
    }

    fn stats(&self) -> StreamStats {
        let q = self.queue.lock().expect("pointer lock");
        StreamStats { dropped: q.dropped(), ..Default::default() }
    }
}

/// The scripted viewer: one sample per poll from the displayed phenotypes.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    pub policy: SyntheticPolicy,
}

impl GazeSource for SyntheticSource {
    fn poll(&mut self, ctx: &PollContext<'_>) -> Result<Vec<GazeSample>, SourceError> {
        Ok(vec![self.policy.step(ctx.summaries, ctx.layout, ctx.now_ms)])
    }
}

/// Configuration naming the one gaze source of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GazeSourceDescriptor {
    NetworkTracker { address: String },
    Replay { path: PathBuf, pace: ReplayPace },
    PointerProxy,
    SyntheticPolicy { target: Target, params: PolicyParams },
}

/// An opened source, plus the pointer feed when the source is the proxy.
pub struct OpenedSource {
    pub source: Box<dyn GazeSource>,
    pub pointer: Option<PointerHandle>,
}

impl GazeSourceDescriptor {
    pub fn open(&self) -> Result<OpenedSource, SourceError> {
        let boxed = |s: Box<dyn GazeSource>| OpenedSource { source: s, pointer: None };
        Ok(match self {
            GazeSourceDescriptor::NetworkTracker { address } => {
                boxed(Box::new(NetworkTracker::connect(address, Duration::from_secs(3))?))
            }
            GazeSourceDescriptor::Replay { path, pace } => boxed(Box::new(Replay::open(path, *pace)?)),
            GazeSourceDescriptor::PointerProxy => {
                let (proxy, handle) = PointerProxy::new();
                OpenedSource { source: Box::new(proxy), pointer: Some(handle) }
            }
            GazeSourceDescriptor::SyntheticPolicy { target, params } => {
                boxed(Box::new(SyntheticSource { policy: SyntheticPolicy::new(*target, *params) }))
            }
        })
    }
}

impl FromStr for GazeSourceDescriptor {
    type Err = SourceError;

    /// `pointer`, `tracker:HOST:PORT`, `replay:PATH`, `replay-realtime:PATH`
    /// or `synthetic:TARGET[:SEED]` (e.g. `synthetic:small-red-cone:7`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SourceError::BadDescriptor(s.to_string());
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match (kind, rest) {
            ("pointer", "") => Ok(GazeSourceDescriptor::PointerProxy),
            ("tracker", addr) if !addr.is_empty() => {
                Ok(GazeSourceDescriptor::NetworkTracker { address: addr.to_string() })
            }
            ("replay", path) if !path.is_empty() => {
                Ok(GazeSourceDescriptor::Replay { path: path.into(), pace: ReplayPace::MaxSpeed })
            }
            ("replay-realtime", path) if !path.is_empty() => {
                Ok(GazeSourceDescriptor::Replay { path: path.into(), pace: ReplayPace::RealTime })
            }
            ("synthetic", spec) => {
                let (target, seed) = spec.split_once(':').unwrap_or((spec, "0"));
                let target = target.parse().map_err(|_| bad())?;
                let seed = seed.parse().map_err(|_| bad())?;
                Ok(GazeSourceDescriptor::SyntheticPolicy {
                    target,
                    params: PolicyParams { seed, ..Default::default() },
                })
            }
            _ => Err(bad()),
        }
    }
}
