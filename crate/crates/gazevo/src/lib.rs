//! The std side of the gaze-driven evolution engine: printable mesh files,
//! gaze sources, the event-sourced session log and its store, replay, the
//! UI wire protocol and service, and the export pipeline.
//!
//! The engine itself lives in [`gazevo_core`], re-exported here as [`core`].

pub use gazevo_core as core;

pub mod export;
pub mod gateway;
pub mod log;
pub mod mesh_io;
pub mod recorder;
pub mod replay;
pub mod sources;
pub mod store;
pub mod tracker;
pub mod wire;
