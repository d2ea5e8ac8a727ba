//! Isosurface extraction: marching cubes, octree-accelerated sparse
//! evaluation, and level-of-detail refinement that reuses coarser values.

mod field;
mod marching;
mod octree;
mod tables;

use nalgebra::Point3;
use thiserror::Error;

pub use field::NetworkField;
pub use marching::{
    extract_mesh_dense, extraction_point, marching_cubes, sample_extraction_grid, ScalarGrid,
    ZERO_PERTURBATION,
};
pub use octree::{extract_mesh, extract_mesh_cached, refine_mesh, EvalStats, GridCache, MeshingConfig};

/// Half-width of the cube meshes are extracted from.
pub const EXTRACTION_HALF_EXTENT: f64 = 0.55;

/// A scalar function evaluated in batches.
pub trait ScalarField: Sync {
    fn evaluate(&self, points: &[Point3<f64>], out: &mut [f64]);
}

impl<F: Fn(&Point3<f64>) -> f64 + Sync> ScalarField for F {
    fn evaluate(&self, points: &[Point3<f64>], out: &mut [f64]) {
        for (p, o) in points.iter().zip(out.iter_mut()) {
            *o = self(p);
        }
    }
}

#[derive(Debug, Error)]
pub enum MeshingError {
    #[error("invalid meshing configuration: {0}")]
    Config(String),
    #[error("missing or mismatched cache: {0}")]
    MissingCache(String),
}
