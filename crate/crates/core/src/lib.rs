//! Interactive evolution of colored 3D objects.
//!
//! Genomes are CPPNs evolved with NEAT-style operators. Each generation of
//! fifteen individuals is shown as a 3x5 grid; the time a viewer's gaze
//! dwells on each cell (or explicit mouse selections) becomes fitness.
//!
//! This crate is `no_std` + `alloc` and free of IO. File formats, gaze
//! sources, persistence and the network service live in the `gazevo` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classify;
pub mod cppn;
pub mod gaze;
pub mod neat;
pub mod session;
pub mod shape;
pub mod simulate;
