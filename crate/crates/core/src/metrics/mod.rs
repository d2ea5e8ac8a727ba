//! Mesh and point-set quality metrics, the spectral band-limit check and
//! the per-level sweep report.

mod distances;
mod kdtree;
mod regularity;
mod report;
mod spectrum;

use thiserror::Error;

pub use distances::{
    chamfer, emd, emd_exact, emd_sinkhorn, hungarian, EmdResult, SinkhornConfig, CHAMFER_SCALE,
    EMD_SCALE, EXACT_EMD_LIMIT,
};
pub use kdtree::{squared_distance, KdTree};
pub use regularity::{surface_regularity, REGULARITY_SCALE};
pub use report::{
    depth_sweep_report, LevelFailure, LevelRow, MetricReport, ShapeMetrics, SweepConfig,
    TREND_TOLERANCE,
};
pub use spectrum::{
    field_spectrum, level_cutoff, line_spacing, random_axis_lines, spectrum_above_cutoff,
    SpectrumLine, CUTOFF_MARGIN, LINE_SAMPLES,
};

use crate::geometry::GeometryError;
use crate::meshing::MeshingError;
use crate::network::NetworkError;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("point sets differ in size: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("spectrum: {0}")]
    Spectrum(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Meshing(#[from] MeshingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
