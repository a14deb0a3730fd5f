//! Event-sourced sessions: every accepted command and its consequences are
//! appended to the log (and, when attached, to a session directory).

use gazevo_core::session::{Command, EngineEvent, Session, SessionConfig, SessionError};

use crate::log::{population_digest, snapshot_digest, LogBody, LogEntry};
use crate::store::{SessionDir, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Log entries derived from the events of one accepted command.
pub fn derived_entries(session: &Session, events: &[EngineEvent]) -> Vec<LogBody> {
    let mut out = Vec::with_capacity(events.len() + 1);
    for event in events {
        out.push(LogBody::Event { event: event.clone() });
        match *event {
            EngineEvent::NewGeneration { trial_id, generation_index } => {
                let trial = session.trial().expect("a new generation belongs to the running trial");
                debug_assert_eq!((trial.trial_id, trial.generation_index), (trial_id, generation_index));
                out.push(LogBody::Population {
                    trial_id,
                    generation_index,
                    digest: population_digest(&trial.population),
                });
            }
            EngineEvent::SnapshotTaken { snapshot_index, .. } => {
                out.push(LogBody::Snapshot {
                    snapshot_index,
                    digest: snapshot_digest(&session.snapshots()[snapshot_index]),
                });
            }
            _ => {}
        }
    }
    out
}

/// A session together with its log.
#[derive(Debug)]
pub struct RecordedSession {
    session: Session,
    log: Vec<LogEntry>,
    dir: Option<SessionDir>,
}

/// Logged with every session so analyses do not mistake the attribute
/// classifier for ground truth.
pub const CLASSIFIER_NOTE: &str = "size, color and shape classes come from heuristic boundaries \
     (volume fraction threshold, nearest primary color, box / ellipsoid / taper fit scores); they are stand-ins, not calibrated labels";

impl RecordedSession {
    pub fn new(config: SessionConfig) -> Result<Self, RecordError> {
        let session = Session::new(config.clone())?;
        let notes = vec![CLASSIFIER_NOTE.to_string()];
        let log = vec![LogEntry { seq: 0, body: LogBody::Config { config, notes } }];
        Ok(RecordedSession { session, log, dir: None })
    }

    /// Records into `dir` as well as in memory.
    pub fn with_dir(config: SessionConfig, mut dir: SessionDir) -> Result<Self, RecordError> {
        let mut s = Self::new(config)?;
        dir.append(&s.log)?;
        s.dir = Some(dir);
        Ok(s)
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn dir(&self) -> Option<&SessionDir> {
        self.dir.as_ref()
    }

    fn next_seq(&self) -> u64 {
        self.log.len() as u64
    }

    /// Applies a command. Refused commands are logged as such and returned
    /// as errors; they never change the session.
    pub fn apply(&mut self, command: Command) -> Result<Vec<EngineEvent>, RecordError> {
        let start = self.log.len();
        let result = self.session.apply(command.clone());
        let bodies = match &result {
            Ok(events) => {
                let mut b = vec![LogBody::Command { command }];
                b.extend(derived_entries(&self.session, events));
                b
            }
            Err(e) => vec![LogBody::Rejected { command, error: e.to_string() }],
        };
        for body in bodies {
            let seq = self.next_seq();
            self.log.push(LogEntry { seq, body });
        }
        if let Some(dir) = &mut self.dir {
            dir.append(&self.log[start..])?;
            if let Ok(events) = &result {
                persist(dir, &self.session, events)?;
            }
        }
        Ok(result?)
    }
}

fn persist(dir: &SessionDir, session: &Session, events: &[EngineEvent]) -> Result<(), StoreError> {
    for event in events {
        match *event {
            EngineEvent::NewGeneration { trial_id, generation_index } => {
                let trial = session.trial().expect("running trial");
                dir.archive_generation(trial_id, generation_index, &trial.population)?;
            }
            EngineEvent::SnapshotTaken { snapshot_index, .. } => {
                dir.write_snapshot(&session.snapshots()[snapshot_index])?;
            }
            EngineEvent::TrialTerminated { .. } | EngineEvent::ReasonRecorded { .. } | EngineEvent::SessionComplete => {
                dir.write_record(session.record())?;
            }
            _ => {}
        }
    }
    Ok(())
}
