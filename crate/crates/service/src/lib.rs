//! Persistence, command-line entry points and the HTTP mesh service for
//! trained lodsdf models.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod query;
pub mod server;

use std::io::Write;
use std::path::Path;

use lodsdf::geometry::{GeometryError, TriangleMesh};
use lodsdf::meshing::MeshingError;
use lodsdf::metrics::MetricsError;
use lodsdf::network::NetworkError;
use lodsdf::training::TrainingError;
use thiserror::Error;

pub use checkpoint::{Checkpoint, CheckpointHeader, FORMAT_VERSION, MAGIC};
pub use config::{DatasetSpec, RunConfig};
pub use query::{mesh_query, slice_query, LatentSource, MeshRequest, MeshResponse, SliceRequest};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
    #[error("resolution {requested} exceeds the maximum of {max}")]
    TooLarge { requested: usize, max: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Meshing(#[from] MeshingError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn atomic_write(
    path: &Path,
    write: impl FnOnce(&mut std::fs::File) -> std::io::Result<()>,
) -> Result<(), ServiceError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| ServiceError::Io(e.error))?;
    Ok(())
}

/// Wire format: `u32` vertex count, `u32` triangle count, `f32` vertex
/// coordinates, `u32` indices; all little-endian.
pub fn encode_mesh(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 12 * (mesh.vertices.len() + mesh.triangles.len()));
    out.extend_from_slice(&(mesh.vertices.len() as u32).to_le_bytes());
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for v in &mesh.vertices {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        for i in t {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

/// Inverse of [`encode_mesh`], up to `f32` rounding of the coordinates.
pub fn decode_mesh(bytes: &[u8]) -> Result<TriangleMesh, ServiceError> {
    let bad = || ServiceError::Invalid("malformed mesh payload".into());
    let word = |i: usize| -> Result<[u8; 4], ServiceError> {
        bytes.get(4 * i..4 * i + 4).and_then(|s| s.try_into().ok()).ok_or_else(bad)
    };
    let nv = u32::from_le_bytes(word(0)?) as usize;
    let nt = u32::from_le_bytes(word(1)?) as usize;
    if bytes.len() != 8 + 12 * (nv + nt) {
        return Err(bad());
    }
    let vertices = (0..nv)
        .map(|v| {
            let c = |k: usize| f32::from_le_bytes(word(2 + 3 * v + k).expect("length checked")) as f64;
            nalgebra::Point3::new(c(0), c(1), c(2))
        })
        .collect();
    let base = 2 + 3 * nv;
    let triangles = (0..nt)
        .map(|t| [0, 1, 2].map(|k| u32::from_le_bytes(word(base + 3 * t + k).expect("length checked"))))
        .collect();
    Ok(TriangleMesh::new(vertices, triangles)?)
}
