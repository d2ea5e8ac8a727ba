use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::distances::{chamfer, emd};
use super::regularity::surface_regularity;
use super::MetricsError;
use crate::geometry::{sample_surface_points, SdfOracle};
use crate::meshing::{extract_mesh, MeshingConfig, NetworkField};
use crate::network::NetworkParams;

/// Relative slack allowed between consecutive levels when judging trends.
pub const TREND_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub meshing: MeshingConfig,
    /// Surface points per shape for the Chamfer distance.
    pub chamfer_points: usize,
    /// Surface points per shape for the Earth mover's distance.
    pub emd_points: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            meshing: MeshingConfig::with_resolution(128),
            chamfer_points: 10_000,
            emd_points: 512,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    pub shape: usize,
    pub cd_e5: f64,
    pub ed_e4: f64,
    pub sr_e3: f64,
    pub evals: u64,
}

/// Shape-averaged metrics at one level; `evals` is the total over shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: usize,
    pub cd_e5: f64,
    pub ed_e4: f64,
    pub sr_e3: f64,
    pub evals: u64,
    pub shapes: Vec<ShapeMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFailure {
    pub level: usize,
    pub shape: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<LevelRow>,
    pub failures: Vec<LevelFailure>,
    /// Each level's ED is at most 5% above the previous level's.
    pub ed_non_increasing: bool,
    /// Each level's SR is at least 95% of the previous level's.
    pub sr_non_decreasing: bool,
    /// Set when ED came from entropic transport instead of exact matching.
    pub ed_approximate: bool,
}

impl MetricReport {
    pub fn from_rows(rows: Vec<LevelRow>, failures: Vec<LevelFailure>, ed_approximate: bool) -> Self {
        let ed_non_increasing = rows
            .windows(2)
            .all(|w| w[1].ed_e4 <= (1.0 + TREND_TOLERANCE) * w[0].ed_e4);
        let sr_non_decreasing = rows
            .windows(2)
            .all(|w| w[1].sr_e3 >= (1.0 - TREND_TOLERANCE) * w[0].sr_e3);
        Self {
            rows,
            failures,
            ed_non_increasing,
            sr_non_decreasing,
            ed_approximate,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,cd_e5,ed_e4,sr_e3,evals\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.level, r.cd_e5, r.ed_e4, r.sr_e3, r.evals).expect("string write");
        }
        out
    }

    pub fn row(&self, level: usize) -> Option<&LevelRow> {
        self.rows.iter().find(|r| r.level == level)
    }
}

fn shape_metrics(
    params: &NetworkParams,
    latent: &[f64],
    oracle: &dyn SdfOracle,
    level: usize,
    shape: usize,
    cfg: &SweepConfig,
) -> Result<(ShapeMetrics, bool), MetricsError> {
    let field = NetworkField::new(params, latent, level)?;
    let (mesh, stats) = extract_mesh(&field, &cfg.meshing)?;
    if mesh.triangles.is_empty() {
        return Err(MetricsError::EmptyInput("extracted mesh is empty"));
    }
    let seed = cfg.seed ^ ((shape as u64) << 32);
    let cd_pred = sample_surface_points(&mesh, cfg.chamfer_points, seed)?;
    let cd_true = oracle.surface_points(cfg.chamfer_points, seed)?;
    let ed_pred = sample_surface_points(&mesh, cfg.emd_points, seed + 1)?;
    let ed_true = oracle.surface_points(cfg.emd_points, seed + 1)?;
    let ed = emd(&ed_pred, &ed_true)?;
    let metrics = ShapeMetrics {
        shape,
        cd_e5: chamfer(&cd_pred, &cd_true)?,
        ed_e4: ed.value,
        sr_e3: surface_regularity(&mesh)?,
        evals: stats.network_evaluations,
    };
    Ok((metrics, ed.approximate))
}

/// Extracts every shape at every head and scores it against its oracle.
/// Shapes that fail at a level are listed in `failures`; the level's means
/// cover the remaining shapes, and a level with no successes has no row.
pub fn depth_sweep_report(
    params: &NetworkParams,
    latents: &[&[f64]],
    oracles: &[&dyn SdfOracle],
    cfg: &SweepConfig,
) -> Result<MetricReport, MetricsError> {
    if latents.len() != oracles.len() {
        return Err(MetricsError::SizeMismatch {
            left: latents.len(),
            right: oracles.len(),
        });
    }
    if latents.is_empty() {
        return Err(MetricsError::EmptyInput("depth sweep needs at least one shape"));
    }
    cfg.meshing.validate()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut approximate = false;
    for level in 1..=params.config.heads() {
        let mut shapes = Vec::new();
        for (shape, (latent, oracle)) in latents.iter().zip(oracles).enumerate() {
            match shape_metrics(params, latent, *oracle, level, shape, cfg) {
                Ok((m, approx)) => {
                    approximate |= approx;
                    shapes.push(m);
                }
                Err(e) => failures.push(LevelFailure {
                    level,
                    shape,
                    message: e.to_string(),
                }),
            }
        }
        if shapes.is_empty() {
            continue;
        }
        let k = shapes.len() as f64;
        rows.push(LevelRow {
            level,
            cd_e5: shapes.iter().map(|s| s.cd_e5).sum::<f64>() / k,
            ed_e4: shapes.iter().map(|s| s.ed_e4).sum::<f64>() / k,
            sr_e3: shapes.iter().map(|s| s.sr_e3).sum::<f64>() / k,
            evals: shapes.iter().map(|s| s.evals).sum(),
            shapes,
        });
    }
    Ok(MetricReport::from_rows(rows, failures, approximate))
}
