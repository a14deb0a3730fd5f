//! Session directories.
//!
//! ```text
//! <store>/subject-<id>/
//!     config.json
//!     events.jsonl
//!     record.json
//!     generations/trial-001/gen-0001.json
//!     snapshots/snap-0000/{snapshot.json, genomes.json, cell-00.stl, …}
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gazevo_core::cppn::Genome;
use gazevo_core::session::{SessionConfig, SessionRecord, SnapshotRecord};
use gazevo_core::shape::{LatticeSpec, Phenotype};

use crate::log::{population_json, to_line, LogEntry};
use crate::mesh_io::write_stl;

pub const CONFIG_FILE: &str = "config.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const RECORD_FILE: &str = "record.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session store {path} is not writable: {source}")]
    Unwritable { path: PathBuf, source: std::io::Error },
    #[error("subject {0} already has a session in this store")]
    SubjectExists(u64),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// A directory holding one session per subject.
#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    /// Opens (creating if needed) a store and checks that it is writable.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let unwritable = |source| StoreError::Unwritable { path: root.clone(), source };
        fs::create_dir_all(&root).map_err(unwritable)?;
        let probe = root.join(".write-probe");
        File::create(&probe).map_err(unwritable)?;
        let _ = fs::remove_file(probe);
        Ok(SessionStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_path(&self, subject_id: u64) -> PathBuf {
        self.root.join(format!("subject-{subject_id}"))
    }

    /// Creates the directory for a new subject; ids are never reused.
    pub fn create_session(&self, config: &SessionConfig) -> Result<SessionDir, StoreError> {
        let path = self.session_path(config.subject_id);
        match fs::create_dir(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(StoreError::SubjectExists(config.subject_id))
            }
            Err(source) => return Err(StoreError::Unwritable { path, source }),
        }
        SessionDir::create(path, config)
    }
}

/// Writer for one session directory.
#[derive(Debug)]
pub struct SessionDir {
    path: PathBuf,
    events: BufWriter<File>,
}

impl SessionDir {
    pub fn create(path: PathBuf, config: &SessionConfig) -> Result<Self, StoreError> {
        fs::create_dir_all(&path).map_err(io_err(&path))?;
        let config_path = path.join(CONFIG_FILE);
        let json = serde_json::to_vec_pretty(config).expect("config serializes");
        fs::write(&config_path, json).map_err(io_err(&config_path))?;
        let events_path = path.join(EVENTS_FILE);
        let file = OpenOptions::new().create_new(true).append(true).open(&events_path).map_err(io_err(&events_path))?;
        Ok(SessionDir { path, events: BufWriter::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, entries: &[LogEntry]) -> Result<(), StoreError> {
        let events_path = self.path.join(EVENTS_FILE);
        for e in entries {
            self.events.write_all(to_line(e).as_bytes()).map_err(io_err(&events_path))?;
        }
        self.events.flush().map_err(io_err(&events_path))
    }

    pub fn archive_generation(
        &self,
        trial_id: u32,
        generation_index: u32,
        genomes: &[Genome],
    ) -> Result<(), StoreError> {
        let dir = self.path.join("generations").join(format!("trial-{trial_id:03}"));
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let file = dir.join(format!("gen-{generation_index:04}.json"));
        fs::write(&file, population_json(genomes)).map_err(io_err(&file))
    }

    /// Writes a snapshot's record, genomes, and one STL per non-empty object.
    pub fn write_snapshot(&self, snapshot: &SnapshotRecord) -> Result<(), StoreError> {
        let dir = snapshot_dir(&self.path, snapshot.snapshot_index);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let record = dir.join("snapshot.json");
        fs::write(&record, serde_json::to_vec_pretty(snapshot).expect("snapshot serializes"))
            .map_err(io_err(&record))?;
        let genomes = dir.join("genomes.json");
        fs::write(&genomes, population_json(&snapshot.genomes)).map_err(io_err(&genomes))?;
        for (cell, bytes) in snapshot_meshes(snapshot).into_iter().enumerate() {
            if let Some(bytes) = bytes {
                let file = dir.join(format!("cell-{cell:02}.stl"));
                fs::write(&file, bytes).map_err(io_err(&file))?;
            }
        }
        Ok(())
    }

    pub fn write_record(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let file = self.path.join(RECORD_FILE);
        fs::write(&file, serde_json::to_vec_pretty(record).expect("record serializes")).map_err(io_err(&file))
    }
}

pub fn snapshot_dir(session: &Path, index: usize) -> PathBuf {
    session.join("snapshots").join(format!("snap-{index:04}"))
}

/// STL bytes for each snapshot genome; `None` where the object is empty.
pub fn snapshot_meshes(snapshot: &SnapshotRecord) -> Vec<Option<Vec<u8>>> {
    let spec = LatticeSpec::new(snapshot.resolution).expect("snapshot resolution was valid when recorded");
    snapshot
        .genomes
        .iter()
        .map(|g| {
            let p = Phenotype::build(g, spec, true).expect("snapshot genomes are acyclic");
            write_stl(&p.mesh()).ok()
        })
        .collect()
}
