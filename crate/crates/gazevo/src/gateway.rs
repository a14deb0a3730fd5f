//! The live session service: one UI client, one subject, one engine.
//!
//! A reader thread turns socket lines into [`ClientMessage`]s; the main loop
//! owns the session, drains client messages and the gaze source once per
//! tick, and pushes the resulting [`ServerMessage`]s back. All engine
//! mutations happen on that single loop.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use gazevo_core::session::{
    Command, ConditionOrder, EngineEvent, EngineSettings, InteractionMode, SessionConfig, DEFAULT_TICK_HZ,
};

use crate::recorder::{RecordError, RecordedSession};
use crate::sources::{GazeSource, GazeSourceDescriptor, PointerHandle, PollContext, SourceError};
use crate::store::{SessionStore, StoreError};
use crate::wire::{ClientMessage, DecodeError, GenerationPayload, ServerMessage, StageRequest, PROTOCOL_VERSION};

#[derive(Debug, Clone)]
pub struct ServeConfig {
    /// `0` picks a free port.
    pub port: u16,
    pub store: PathBuf,
    pub subject_id: u64,
    pub source: GazeSourceDescriptor,
    /// The condition the subject sees first.
    pub first_mode: InteractionMode,
    pub seed: u64,
    pub tick_hz: f64,
    pub resolution: usize,
}

impl ServeConfig {
    pub fn session_config(&self) -> SessionConfig {
        let mut engine = EngineSettings { resolution: self.resolution, ..Default::default() };
        engine.evolution.rng_seed = self.seed;
        SessionConfig {
            subject_id: self.subject_id,
            condition_order: match self.first_mode {
                InteractionMode::Gaze => ConditionOrder::GazeFirst,
                InteractionMode::Mouse => ConditionOrder::MouseFirst,
            },
            engine,
            ..Default::default()
        }
    }
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            port: 7878,
            store: PathBuf::from("sessions"),
            subject_id: 1,
            source: GazeSourceDescriptor::PointerProxy,
            first_mode: InteractionMode::Gaze,
            seed: 0,
            tick_hz: DEFAULT_TICK_HZ,
            resolution: gazevo_core::shape::DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("session store unwritable: {0}")]
    SessionStoreUnwritable(StoreError),
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a served session ended.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeSummary {
    pub session_dir: PathBuf,
    pub commands: usize,
    pub session_complete: bool,
}

pub struct Server {
    listener: TcpListener,
    store: SessionStore,
    config: ServeConfig,
}

impl Server {
    pub fn bind(config: ServeConfig) -> Result<Self, ServeError> {
        let store = SessionStore::open(&config.store).map_err(ServeError::SessionStoreUnwritable)?;
        let listener = TcpListener::bind(("127.0.0.1", config.port)).map_err(|e| match e.kind() {
            ErrorKind::AddrInUse => ServeError::PortInUse(config.port),
            _ => ServeError::Io(e),
        })?;
        Ok(Server { listener, store, config })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serves the single client of this session until it disconnects or the
    /// session completes.
    pub fn serve_one(self) -> Result<ServeSummary, ServeError> {
        let (stream, _) = self.listener.accept()?;
        let session_config = self.config.session_config();
        let dir = self.store.create_session(&session_config).map_err(|e| match e {
            StoreError::Unwritable { .. } => ServeError::SessionStoreUnwritable(e),
            other => ServeError::Store(other),
        })?;
        let session_dir = dir.path().to_path_buf();
        let recorded = RecordedSession::with_dir(session_config, dir)?;
        let opened = self.config.source.open()?;
        let mut conn = Connection::new(stream, recorded, opened.source, opened.pointer, self.config.tick_hz)?;
        conn.run()?;
        Ok(ServeSummary {
            session_dir,
            commands: conn.commands,
            session_complete: conn.session.session().is_complete(),
        })
    }
}

enum Inbound {
    Message(u64, ClientMessage),
    Invalid(DecodeError),
}

struct Connection {
    writer: TcpStream,
    inbound: Receiver<Inbound>,
    session: RecordedSession,
    source: Box<dyn GazeSource>,
    pointer: Option<PointerHandle>,
    tick_hz: f64,
    started: Instant,
    out_seq: u64,
    last_in_seq: Option<u64>,
    greeted: bool,
    source_ended: bool,
    commands: usize,
    last_tick_ms: Option<f64>,
}

impl Connection {
    fn new(
        stream: TcpStream,
        session: RecordedSession,
        source: Box<dyn GazeSource>,
        pointer: Option<PointerHandle>,
        tick_hz: f64,
    ) -> Result<Self, ServeError> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                let item = match ClientMessage::decode(&line) {
                    Ok((seq, m)) => Inbound::Message(seq, m),
                    Err(e) => Inbound::Invalid(e),
                };
                if tx.send(item).is_err() {
                    break;
                }
            }
        });
        Ok(Connection {
            writer: stream,
            inbound: rx,
            session,
            source,
            pointer,
            tick_hz,
            started: Instant::now(),
            out_seq: 0,
            last_in_seq: None,
            greeted: false,
            source_ended: false,
            commands: 0,
            last_tick_ms: None,
        })
    }

    fn now_ms(&self) -> f64 {
        self.started.elapsed().as_secs_f64() * 1000.0
    }

    fn send(&mut self, msg: ServerMessage) -> std::io::Result<()> {
        let line = msg.into_wire(self.out_seq).to_line();
        self.out_seq += 1;
        self.writer.write_all(line.as_bytes())
    }

    fn send_error(&mut self, code: &str, message: String, echo_seq: Option<u64>) -> std::io::Result<()> {
        self.send(ServerMessage::Error { code: code.to_string(), message, echo_seq })
    }

    fn run(&mut self) -> Result<(), ServeError> {
        let period = Duration::from_secs_f64(1.0 / self.tick_hz);
        let mut next = Instant::now();
        loop {
            loop {
                match self.inbound.try_recv() {
                    Ok(Inbound::Message(seq, msg)) => self.handle(seq, msg)?,
                    Ok(Inbound::Invalid(e)) => self.send_error(e.code, e.message, e.seq)?,
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => return Ok(()),
                }
            }
            if self.session.session().is_complete() {
                return Ok(());
            }
            self.gaze_tick()?;
            next += period;
            match next.checked_duration_since(Instant::now()) {
                Some(wait) => thread::sleep(wait),
                None => next = Instant::now(),
            }
        }
    }

    fn apply(&mut self, command: Command, echo_seq: Option<u64>) -> Result<(), ServeError> {
        match self.session.apply(command) {
            Ok(events) => {
                self.commands += 1;
                self.forward(&events)?;
            }
            Err(RecordError::Session(e)) => self.send_error("rejected", e.to_string(), echo_seq)?,
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    fn handle(&mut self, seq: u64, msg: ClientMessage) -> Result<(), ServeError> {
        if self.last_in_seq.is_some_and(|last| seq <= last) {
            return Ok(self.send_error("seq_not_increasing", format!("seq {seq} does not increase"), Some(seq))?);
        }
        self.last_in_seq = Some(seq);
        if !self.greeted {
            match msg {
                ClientMessage::Hello { version } if version == PROTOCOL_VERSION => {
                    self.greeted = true;
                    let config = self.session.session().config();
                    let mode = config.condition_order.modes()[0];
                    let subject_id = config.subject_id;
                    self.send(ServerMessage::Hello { version: PROTOCOL_VERSION, subject_id, mode })?;
                }
                ClientMessage::Hello { version } => self.send_error(
                    "version_mismatch",
                    format!("server speaks version {PROTOCOL_VERSION}, client {version}"),
                    Some(seq),
                )?,
                _ => self.send_error("handshake_required", "send hello first".into(), Some(seq))?,
            }
            return Ok(());
        }
        let t_ms = self.now_ms();
        let command = match msg {
            ClientMessage::Hello { .. } => {
                return Ok(self.send_error("already_greeted", "duplicate hello".into(), Some(seq))?)
            }
            ClientMessage::PointerSample { x, y } => {
                match (&self.pointer, x, y) {
                    (Some(p), Some(x), Some(y)) => p.push(t_ms, x, y),
                    (Some(p), _, _) => p.leave(t_ms),
                    // pointer positions only matter when they stand in for gaze
                    (None, _, _) => {}
                }
                return Ok(());
            }
            ClientMessage::StartStage { stage: StageRequest::Directed, target } => {
                Command::StartDirected { t_ms, target }
            }
            ClientMessage::StartStage { stage: StageRequest::FreeForm, .. } => Command::StartFreeForm { t_ms },
            ClientMessage::SelectionSubmit { cells } => Command::SubmitSelection { t_ms, cells },
            ClientMessage::Terminate { reason } => Command::Terminate { t_ms, reason },
            ClientMessage::Snapshot {} => Command::Snapshot { t_ms },
            ClientMessage::Reason { text } => Command::RecordReason { t_ms, text },
        };
        self.apply(command, Some(seq))
    }

    fn gaze_tick(&mut self) -> Result<(), ServeError> {
        let now = self.now_ms();
        let running_gaze = self.session.session().trial().is_some_and(|t| t.mode == InteractionMode::Gaze);
        if !running_gaze {
            self.last_tick_ms = None;
            return Ok(());
        }
        let samples = if self.source_ended {
            Vec::new()
        } else {
            let trial = self.session.session().trial().expect("checked above");
            let layout = trial.settings().layout;
            let ctx = PollContext { now_ms: now, summaries: &trial.summaries, layout: &layout };
            match self.source.poll(&ctx) {
                Ok(s) => s,
                Err(SourceError::StreamEnded) => {
                    self.source_ended = true;
                    self.send_error("gaze_stream_ended", "gaze source ended; no further dwell".into(), None)?;
                    Vec::new()
                }
                Err(e) => return Err(e.into()),
            }
        };
        let Some(last) = self.last_tick_ms.replace(now) else {
            return Ok(());
        };
        let dt_ms = now - last;
        if dt_ms > 0.0 {
            self.apply(Command::Tick { t_ms: now, dt_ms, samples }, None)?;
        }
        Ok(())
    }

    fn forward(&mut self, events: &[EngineEvent]) -> Result<(), ServeError> {
        for event in events {
            let msg = match *event {
                EngineEvent::TrialStarted { trial_id, stage, mode } => {
                    ServerMessage::TrialStarted { trial_id, stage, mode }
                }
                EngineEvent::NewGeneration { .. } => {
                    let s = self.session.session();
                    let trial = s.trial().expect("a new generation belongs to the running trial");
                    let stage_elapsed = s.freeform_elapsed_ms(self.now_ms());
                    ServerMessage::NewGeneration(Box::new(GenerationPayload::from_trial(trial, stage_elapsed)))
                }
                EngineEvent::HighlightCell { cell } => ServerMessage::HighlightCell { cell },
                EngineEvent::Paused => ServerMessage::Paused {},
                EngineEvent::Resumed => ServerMessage::Resumed {},
                EngineEvent::GenerationClosed { generation_index, fitness, .. } => {
                    ServerMessage::GenerationClosed { generation_index, fitness }
                }
                EngineEvent::SnapshotTaken { snapshot_index, terminal, .. } => {
                    ServerMessage::SnapshotTaken { snapshot_index, terminal }
                }
                EngineEvent::TrialTerminated { trial_id, generations, elapsed_ms } => {
                    ServerMessage::TrialTerminated { trial_id, generations, elapsed_ms }
                }
                EngineEvent::ReasonRecorded { trial_id } => ServerMessage::ReasonRecorded { trial_id },
                EngineEvent::StageComplete { stage, mode } => ServerMessage::StageComplete { stage, mode },
                EngineEvent::SessionComplete => ServerMessage::SessionComplete {},
            };
            self.send(msg)?;
        }
        Ok(())
    }
}
