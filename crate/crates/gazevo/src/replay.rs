//! Integrity check for recorded sessions: re-execute the logged commands on
//! a fresh engine and demand that every derived entry comes out identical.

use std::fs;
use std::path::Path;

use gazevo_core::session::Session;

use crate::log::{population_json, LogBody, LogEntry};
use crate::recorder::derived_entries;
use crate::store::{snapshot_dir, EVENTS_FILE};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReplayError {
    #[error("session log is corrupt: {0}")]
    LogCorrupt(String),
    #[error("replay diverged from the log at seq {seq}: {reason}")]
    DivergenceDetected { seq: u64, reason: String },
}

/// Outcome of a successful replay.
#[derive(Debug)]
pub struct ReplayReport {
    pub session: Session,
    pub commands: usize,
    pub generations: usize,
    pub snapshots: usize,
}

pub fn parse_log(text: &str) -> Result<Vec<LogEntry>, ReplayError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let entry: LogEntry =
            serde_json::from_str(line).map_err(|e| ReplayError::LogCorrupt(format!("line {}: {e}", i + 1)))?;
        if entry.seq != entries.len() as u64 {
            return Err(ReplayError::LogCorrupt(format!(
                "line {} has seq {}, expected {}",
                i + 1,
                entry.seq,
                entries.len()
            )));
        }
        entries.push(entry);
    }
    Ok(entries)
}

fn diverged(seq: u64, reason: impl Into<String>) -> ReplayError {
    ReplayError::DivergenceDetected { seq, reason: reason.into() }
}

/// Re-executes an in-memory log.
pub fn replay_entries(entries: &[LogEntry]) -> Result<ReplayReport, ReplayError> {
    let Some(LogEntry { body: LogBody::Config { config, .. }, .. }) = entries.first() else {
        return Err(ReplayError::LogCorrupt("log does not start with the session configuration".into()));
    };
    let mut session =
        Session::new(config.clone()).map_err(|e| ReplayError::LogCorrupt(format!("bad configuration: {e}")))?;
    let mut report = ReplayReport { session: session.clone(), commands: 0, generations: 0, snapshots: 0 };
    let mut i = 1;
    while i < entries.len() {
        let entry = &entries[i];
        i += 1;
        let command = match &entry.body {
            LogBody::Command { command } => command,
            LogBody::Rejected { command, .. } => {
                if session.clone().apply(command.clone()).is_ok() {
                    return Err(diverged(entry.seq, "a command the log shows as refused was accepted"));
                }
                continue;
            }
            LogBody::Config { .. } => {
                return Err(ReplayError::LogCorrupt(format!("second configuration at seq {}", entry.seq)))
            }
            _ => return Err(diverged(entry.seq, "derived entry without a preceding command")),
        };
        let events = session
            .apply(command.clone())
            .map_err(|e| diverged(entry.seq, format!("command refused on replay: {e}")))?;
        report.commands += 1;
        for expected in derived_entries(&session, &events) {
            let Some(logged) = entries.get(i) else {
                return Err(diverged(entries.len() as u64, "log ends before the command's consequences"));
            };
            if logged.body != expected {
                return Err(diverged(logged.seq, format!("expected {expected:?}, log has {:?}", logged.body)));
            }
            match expected {
                LogBody::Population { .. } => report.generations += 1,
                LogBody::Snapshot { .. } => report.snapshots += 1,
                _ => {}
            }
            i += 1;
        }
        if let Some(extra) = entries.get(i).filter(|e| e.body.is_derived()) {
            return Err(diverged(extra.seq, "log has consequences the replay did not produce"));
        }
    }
    report.session = session;
    Ok(report)
}

/// Replays a session directory and checks its snapshot archives.
pub fn replay_dir(dir: &Path) -> Result<ReplayReport, ReplayError> {
    let log_path = dir.join(EVENTS_FILE);
    let text = fs::read_to_string(&log_path)
        .map_err(|e| ReplayError::LogCorrupt(format!("cannot read {}: {e}", log_path.display())))?;
    let entries = parse_log(&text)?;
    let report = replay_entries(&entries)?;
    for entry in &entries {
        if let LogBody::Snapshot { snapshot_index, .. } = entry.body {
            let file = snapshot_dir(dir, snapshot_index).join("genomes.json");
            let stored = fs::read(&file)
                .map_err(|e| diverged(entry.seq, format!("snapshot archive {}: {e}", file.display())))?;
            if stored != population_json(&report.session.snapshots()[snapshot_index].genomes) {
                return Err(diverged(entry.seq, format!("snapshot archive {} differs", file.display())));
            }
        }
    }
    Ok(report)
}
