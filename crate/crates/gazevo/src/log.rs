//! The append-only session log.
//!
//! Each line is one JSON [`LogEntry`]. The first entry records the session
//! configuration; after that every accepted command is followed by the
//! events it produced and by digests of every population and snapshot it
//! created. Re-executing the commands must reproduce everything else.

use gazevo_core::cppn::Genome;
use gazevo_core::session::{Command, EngineEvent, SessionConfig, SnapshotRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub body: LogBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogBody {
    Config {
        config: SessionConfig,
        /// Caveats a reader of the log should know about.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        notes: Vec<String>,
    },
    Command {
        command: Command,
    },
    /// A command the engine refused; kept for audit, skipped on replay.
    Rejected {
        command: Command,
        error: String,
    },
    Event {
        event: EngineEvent,
    },
    Population {
        trial_id: u32,
        generation_index: u32,
        digest: String,
    },
    Snapshot {
        snapshot_index: usize,
        digest: String,
    },
}

impl LogBody {
    /// Entries derived from commands; replay recomputes and compares them.
    pub fn is_derived(&self) -> bool {
        matches!(self, LogBody::Event { .. } | LogBody::Population { .. } | LogBody::Snapshot { .. })
    }
}

pub fn to_line(entry: &LogEntry) -> String {
    serde_json::to_string(entry).expect("log entries serialize") + "\n"
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn population_json(genomes: &[Genome]) -> Vec<u8> {
    serde_json::to_vec(genomes).expect("genomes serialize")
}

pub fn population_digest(genomes: &[Genome]) -> String {
    sha256_hex(&population_json(genomes))
}

pub fn snapshot_digest(snapshot: &SnapshotRecord) -> String {
    sha256_hex(&serde_json::to_vec(snapshot).expect("snapshots serialize"))
}
