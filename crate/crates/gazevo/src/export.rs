//! Genome → printable mesh file.

use gazevo_core::cppn::{validate, Genome, Violation};
use gazevo_core::shape::{LatticeError, LatticeSpec, Phenotype};
use serde::Deserialize;

use crate::mesh_io::{export_mesh, MeshFormat, MeshIoError};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("genome file does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("genome index {index} out of range ({len} genomes in file)")]
    NoSuchGenome { index: usize, len: usize },
    #[error("invalid genome: {0:?}")]
    InvalidGenome(Vec<Violation>),
    #[error(transparent)]
    Resolution(#[from] LatticeError),
    #[error("the genome produces no surface at this resolution")]
    EmptyMesh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportOutcome {
    pub bytes: Vec<u8>,
    pub triangles: usize,
    pub volume_fraction: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GenomeFile {
    One(Genome),
    Many(Vec<Genome>),
}

/// Reads a genome from JSON holding either one genome or a list of them
/// (e.g. a snapshot's `genomes.json`), picking entry `index` of a list.
pub fn load_genome(json: &str, index: usize) -> Result<Genome, ExportError> {
    let g = match serde_json::from_str(json)? {
        GenomeFile::One(g) => g,
        GenomeFile::Many(list) => {
            let len = list.len();
            list.into_iter().nth(index).ok_or(ExportError::NoSuchGenome { index, len })?
        }
    };
    // restore canonical gene order in case the file was edited by hand
    Ok(Genome::from_genes(g.nodes().to_vec(), g.connections().to_vec()))
}

/// Samples, keeps the largest component, meshes and encodes.
pub fn export_genome(genome: &Genome, resolution: usize, format: MeshFormat) -> Result<ExportOutcome, ExportError> {
    let violations = validate(genome);
    if !violations.is_empty() {
        return Err(ExportError::InvalidGenome(violations));
    }
    let spec = LatticeSpec::new(resolution)?;
    let p = Phenotype::build(genome, spec, true).map_err(|_| ExportError::InvalidGenome(Vec::new()))?;
    let mesh = p.mesh();
    let bytes = export_mesh(&mesh, format).map_err(|e| match e {
        MeshIoError::EmptyMesh => ExportError::EmptyMesh,
        other => unreachable!("encoding cannot fail otherwise: {other}"),
    })?;
    Ok(ExportOutcome { bytes, triangles: mesh.triangles.len(), volume_fraction: p.grid.volume_fraction() })
}
