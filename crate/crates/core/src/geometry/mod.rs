//! Ground-truth signed distance oracles, training-sample generation and
//! mesh I/O.

mod mesh;
mod obj;
mod sampling;
mod shapes;

use thiserror::Error;

pub use mesh::{closest_point_on_triangle, MeshSdf, TriangleMesh};
pub use obj::{format_obj, load_obj, parse_obj, save_obj};
pub use sampling::{
    sample_surface_points, sample_training_set, SdfOracle, SdfSample, SdfSampleSet,
    NEAR_SURFACE_SIGMAS, SAMPLE_BOX_HALF_EXTENT, UNIFORM_SHARE,
};
pub(crate) use sampling::stream_rng;
pub use shapes::{desk_shapes, held_out_shape, AnalyticShape, UNIT_HALF_EXTENT};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh is not watertight (some edge is not shared by exactly two triangles)")]
    NotWatertight,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("invalid sampling request: {0}")]
    InvalidSampling(String),
    #[error("OBJ parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sample file: {0}")]
    SampleFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
