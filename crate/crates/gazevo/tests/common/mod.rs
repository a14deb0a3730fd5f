#![allow(dead_code)]

/// Genome generators and the reference evaluator shared with the core tests.
#[path = "../../../core/tests/common/mod.rs"]
pub mod genomes;

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use gazevo::wire::{ClientMessage, ServerMessage, WireMessage};

/// A scripted UI client.
pub struct Client {
    writer: TcpStream,
    lines: Receiver<String>,
    seq: u64,
    pub received: Vec<(u64, ServerMessage)>,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).expect("connect to server");
        let reader = BufReader::new(stream.try_clone().unwrap());
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines().map_while(Result::ok) {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Client { writer: stream, lines: rx, seq: 0, received: Vec::new() }
    }

    pub fn send(&mut self, msg: ClientMessage) -> u64 {
        self.seq += 1;
        let line = msg.into_wire(self.seq).to_line();
        self.send_raw(&line);
        self.seq
    }

    pub fn send_raw(&mut self, line: &str) {
        self.writer.write_all(line.as_bytes()).unwrap();
    }

    /// Reads messages until `pred` matches one, the server hangs up, or
    /// `timeout` elapses.
    pub fn wait_for(&mut self, timeout: Duration, pred: impl Fn(&ServerMessage) -> bool) -> Option<ServerMessage> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.checked_duration_since(Instant::now())?;
            let line = match self.lines.recv_timeout(left) {
                Ok(line) => line,
                Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => return None,
            };
            let wire: WireMessage = serde_json::from_str(&line).expect("server sends valid JSON");
            let seq = wire.seq;
            let msg = ServerMessage::from_wire(wire).expect("server sends known messages");
            self.received.push((seq, msg.clone()));
            if pred(&msg) {
                return Some(msg);
            }
        }
    }

    /// Closes the sending half so the server sees the client leave.
    pub fn close(&self) {
        let _ = self.writer.shutdown(std::net::Shutdown::Both);
    }
}

use gazevo::core::classify::Target;
use gazevo::core::gaze::{GazeSample, GridLayout, PolicyParams, SyntheticPolicy};
use gazevo::core::session::{Command, ConditionOrder, InteractionMode, SessionConfig, FREEFORM_WINDOW_MS};
use gazevo::recorder::RecordedSession;
use gazevo::store::SessionStore;

/// Drives a complete two-condition session through the recorder: synthetic
/// gaze (with a pause), random mouse selections, snapshots, a rejected
/// command, early and on-time free-form terminations. Returns the session
/// directory.
pub fn record_scripted_session(store: &std::path::Path, subject_id: u64, seed: u64) -> std::path::PathBuf {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut config = SessionConfig {
        subject_id,
        condition_order: if seed.is_multiple_of(2) { ConditionOrder::GazeFirst } else { ConditionOrder::MouseFirst },
        ..Default::default()
    };
    config.engine.resolution = 8;
    config.engine.evolution.rng_seed = seed;
    let dir = SessionStore::open(store).unwrap().create_session(&config).unwrap();
    let path = dir.path().to_path_buf();
    let mut rec = RecordedSession::with_dir(config, dir).unwrap();
    let layout = GridLayout::default();
    let mut t = 0.0;
    let dt = 1000.0 / 30.0;

    let run_trial = |rec: &mut RecordedSession, t: &mut f64, generations: u32, rng: &mut rand_chacha::ChaCha8Rng| {
        let mode = rec.session().mode().unwrap();
        let target = rec.session().targets().last().copied().unwrap_or(Target::all()[0]);
        let mut policy = SyntheticPolicy::new(target, PolicyParams { seed: rng.random(), ..Default::default() });
        let mut closed = 0;
        while closed < generations {
            *t += dt;
            match mode {
                InteractionMode::Gaze => {
                    let trial = rec.session().trial().unwrap();
                    let sample = if closed == 1 && rng.random_bool(0.3) {
                        GazeSample::invalid(*t)
                    } else {
                        policy.step(&trial.summaries, &layout, *t)
                    };
                    let events = rec.apply(Command::Tick { t_ms: *t, dt_ms: dt, samples: vec![sample] }).unwrap();
                    closed += events
                        .iter()
                        .filter(|e| matches!(e, gazevo::core::session::EngineEvent::GenerationClosed { .. }))
                        .count() as u32;
                }
                InteractionMode::Mouse => {
                    // a gaze tick is refused while the mouse condition runs
                    if closed == 0 {
                        assert!(rec.apply(Command::Tick { t_ms: *t, dt_ms: dt, samples: vec![] }).is_err());
                    }
                    let n = rng.random_range(1..=4);
                    let cells: Vec<usize> = (0..n).map(|_| rng.random_range(0..15)).collect();
                    rec.apply(Command::SubmitSelection { t_ms: *t, cells }).unwrap();
                    closed += 1;
                }
            }
            if closed == 1 && rng.random_bool(0.05) {
                rec.apply(Command::Snapshot { t_ms: *t }).unwrap();
            }
        }
    };

    for _ in 0..2 {
        for _ in 0..3 {
            t += 10.0;
            rec.apply(Command::StartDirected { t_ms: t, target: None }).unwrap();
            run_trial(&mut rec, &mut t, 2, &mut rng);
            rec.apply(Command::Snapshot { t_ms: t }).unwrap();
            rec.apply(Command::Terminate { t_ms: t, reason: None }).unwrap();
            rec.apply(Command::RecordReason { t_ms: t, text: "it matched".into() }).unwrap();
        }
        t += 10.0;
        let stage_start = t;
        rec.apply(Command::StartFreeForm { t_ms: t }).unwrap();
        run_trial(&mut rec, &mut t, 1, &mut rng);
        // an early termination restarts the free-form trial
        rec.apply(Command::Terminate { t_ms: t, reason: Some("start over".into()) }).unwrap();
        run_trial(&mut rec, &mut t, 1, &mut rng);
        t = t.max(stage_start + FREEFORM_WINDOW_MS + 1.0);
        rec.apply(Command::Terminate { t_ms: t, reason: Some("time".into()) }).unwrap();
    }
    assert!(
        rec.session().is_complete(),
        "{:#?}",
        rec.session()
            .record()
            .trials
            .iter()
            .map(|t| (t.mode, t.stage.kind(), t.terminated, t.generations))
            .collect::<Vec<_>>()
    );
    path
}
