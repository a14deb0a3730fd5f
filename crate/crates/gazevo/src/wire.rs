//! The UI protocol: LF-delimited JSON messages `{"type", "seq", "payload"}`.
//!
//! A connection opens with a `hello` exchange carrying [`PROTOCOL_VERSION`].
//! Each side numbers its own messages with strictly increasing `seq`.
//! Unknown message types are answered with an `error`; they are never
//! silently ignored.

use gazevo_core::classify::{AttributeSummary, Target};
use gazevo_core::gaze::GRID_CELLS;
use gazevo_core::session::{Fitness, InteractionMode, Stage, StageKind, TrialState};
use gazevo_core::shape::ColorTriple;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

/// The envelope every message travels in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    #[serde(rename = "type")]
    pub kind: String,
    pub seq: u64,
    #[serde(default)]
    pub payload: Value,
}

impl WireMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageRequest {
    Directed,
    FreeForm,
}

/// Messages from the UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        version: u32,
    },
    StartStage {
        stage: StageRequest,
        #[serde(default)]
        target: Option<Target>,
    },
    /// Pointer position in normalized screen coordinates; `null`
    /// coordinates mean the pointer left the display.
    PointerSample {
        x: Option<f64>,
        y: Option<f64>,
    },
    SelectionSubmit {
        cells: Vec<usize>,
    },
    Terminate {
        #[serde(default)]
        reason: Option<String>,
    },
    Snapshot {},
    Reason {
        text: String,
    },
}

impl ClientMessage {
    pub const TYPES: [&'static str; 7] =
        ["hello", "start_stage", "pointer_sample", "selection_submit", "terminate", "snapshot", "reason"];
}

/// One displayed object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationEntry {
    pub cell: usize,
    pub vertices: Vec<[f64; 3]>,
    pub indices: Vec<[u32; 3]>,
    pub color: ColorTriple,
    pub summary: AttributeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timers {
    pub trial_elapsed_ms: f64,
    pub stage_elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPayload {
    pub trial_id: u32,
    pub generation_index: u32,
    pub stage: Stage,
    pub mode: InteractionMode,
    pub entries: Vec<GenerationEntry>,
    pub timers: Timers,
}

impl GenerationPayload {
    pub fn from_trial(trial: &TrialState, stage_elapsed_ms: Option<f64>) -> Self {
        let entries = trial
            .phenotypes
            .iter()
            .zip(&trial.summaries)
            .enumerate()
            .map(|(cell, (p, summary))| {
                let mesh = p.mesh();
                GenerationEntry {
                    cell,
                    vertices: mesh.vertices,
                    indices: mesh.triangles,
                    color: p.color,
                    summary: *summary,
                }
            })
            .collect();
        GenerationPayload {
            trial_id: trial.trial_id,
            generation_index: trial.generation_index,
            stage: trial.stage,
            mode: trial.mode,
            entries,
            timers: Timers { trial_elapsed_ms: trial.elapsed_ms, stage_elapsed_ms },
        }
    }

    /// Exactly one entry per cell, in cell order.
    pub fn is_complete(&self) -> bool {
        self.entries.len() == GRID_CELLS && self.entries.iter().enumerate().all(|(i, e)| e.cell == i)
    }
}

/// Messages to the UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        version: u32,
        subject_id: u64,
        mode: InteractionMode,
    },
    TrialStarted {
        trial_id: u32,
        stage: Stage,
        mode: InteractionMode,
    },
    NewGeneration(Box<GenerationPayload>),
    HighlightCell {
        cell: usize,
    },
    Paused {},
    Resumed {},
    GenerationClosed {
        generation_index: u32,
        fitness: Fitness,
    },
    SnapshotTaken {
        snapshot_index: usize,
        terminal: bool,
    },
    /// The trial ended; the UI should ask the subject why.
    TrialTerminated {
        trial_id: u32,
        generations: u32,
        elapsed_ms: f64,
    },
    ReasonRecorded {
        trial_id: u32,
    },
    StageComplete {
        stage: StageKind,
        mode: InteractionMode,
    },
    SessionComplete {},
    Error {
        code: String,
        message: String,
        echo_seq: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeError {
    pub code: &'static str,
    pub message: String,
    pub seq: Option<u64>,
}

fn typed<T: DeserializeOwned>(msg: WireMessage) -> Result<T, serde_json::Error> {
    let payload = if msg.payload.is_null() { Value::Object(Default::default()) } else { msg.payload };
    serde_json::from_value(serde_json::json!({ "type": msg.kind, "payload": payload }))
}

impl ServerMessage {
    pub fn into_wire(self, seq: u64) -> WireMessage {
        let mut v = serde_json::to_value(self).expect("server messages serialize");
        let kind = v["type"].as_str().expect("tagged").to_string();
        let payload = v.get_mut("payload").map(Value::take).unwrap_or(Value::Null);
        WireMessage { kind, seq, payload }
    }

    pub fn from_wire(msg: WireMessage) -> Result<Self, serde_json::Error> {
        typed(msg)
    }
}

impl ClientMessage {
    pub fn into_wire(self, seq: u64) -> WireMessage {
        let mut v = serde_json::to_value(self).expect("client messages serialize");
        let kind = v["type"].as_str().expect("tagged").to_string();
        let payload = v.get_mut("payload").map(Value::take).unwrap_or(Value::Null);
        WireMessage { kind, seq, payload }
    }

    /// Parses one line from the UI.
    pub fn decode(line: &str) -> Result<(u64, ClientMessage), DecodeError> {
        let value: Value = serde_json::from_str(line).map_err(|e| DecodeError {
            code: "malformed",
            message: e.to_string(),
            seq: None,
        })?;
        let seq = value.get("seq").and_then(Value::as_u64);
        let msg: WireMessage = serde_json::from_value(value).map_err(|e| DecodeError {
            code: "malformed",
            message: e.to_string(),
            seq,
        })?;
        if !Self::TYPES.contains(&msg.kind.as_str()) {
            return Err(DecodeError {
                code: "unknown_type",
                message: format!("unknown message type {:?}", msg.kind),
                seq,
            });
        }
        let seq = msg.seq;
        typed(msg).map(|m| (seq, m)).map_err(|e| DecodeError {
            code: "bad_payload",
            message: e.to_string(),
            seq: Some(seq),
        })
    }
}
