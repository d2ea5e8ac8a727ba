use std::collections::HashMap;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::marching::{corner_key, extraction_point, polygonize};
use super::tables::CORNERS;
use super::{MeshingError, ScalarField, EXTRACTION_HALF_EXTENT};
use crate::geometry::TriangleMesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshingConfig {
    pub base_resolution: usize,
    pub target_resolution: usize,
    /// Cells whose smallest corner magnitude exceeds this many cell
    /// diagonals are dropped.
    pub subdivision_factor: f64,
    /// Cached coarse values at least this large are reused during
    /// refinement; `None` means twice the finest cell diagonal.
    pub reuse_threshold: Option<f64>,
    pub iso: f64,
}

impl Default for MeshingConfig {
    fn default() -> Self {
        Self {
            base_resolution: 32,
            target_resolution: 256,
            subdivision_factor: 3.0,
            reuse_threshold: None,
            iso: 0.0,
        }
    }
}

impl MeshingConfig {
    pub fn with_resolution(target_resolution: usize) -> Self {
        Self {
            base_resolution: target_resolution.min(32),
            target_resolution,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MeshingError> {
        let (b, t) = (self.base_resolution, self.target_resolution);
        if b == 0 || t < b || t % b != 0 || !(t / b).is_power_of_two() {
            return Err(MeshingError::Config(format!(
                "target resolution {t} must be a power-of-two multiple of base {b}"
            )));
        }
        if !(self.subdivision_factor >= 1.0) {
            return Err(MeshingError::Config(format!(
                "subdivision factor {} must be at least 1",
                self.subdivision_factor
            )));
        }
        if let Some(tau) = self.reuse_threshold {
            if !(tau > 0.0) {
                return Err(MeshingError::Config(format!("reuse threshold {tau} must be positive")));
            }
        }
        Ok(())
    }

    pub fn cell_diagonal(resolution: usize) -> f64 {
        3f64.sqrt() * 2.0 * EXTRACTION_HALF_EXTENT / resolution as f64
    }

    pub fn tau(&self) -> f64 {
        self.reuse_threshold
            .unwrap_or_else(|| 2.0 * Self::cell_diagonal(self.target_resolution))
    }

    /// Octree depth below the base grid.
    pub fn depth(&self) -> usize {
        (self.target_resolution / self.base_resolution).trailing_zeros() as usize
    }
}

/// Work done by one extraction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalStats {
    #[serde(rename = "evals")]
    pub network_evaluations: u64,
    /// Cells visited at each octree level, coarsest first.
    pub cells_per_level: Vec<usize>,
}

/// Every corner value computed by an extraction, keyed on the finest grid,
/// so a later extraction at another level can reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCache {
    pub level: usize,
    pub base_resolution: usize,
    pub target_resolution: usize,
    pub values: HashMap<u64, f64>,
}

/// Coarse-to-fine sparse evaluation. `eval` receives finest-grid corner
/// indices and returns their values.
fn octree(
    cfg: &MeshingConfig,
    mut eval: impl FnMut(&[[usize; 3]]) -> Vec<f64>,
) -> Result<(TriangleMesh, Vec<usize>, HashMap<u64, f64>), MeshingError> {
    cfg.validate()?;
    let target = cfg.target_resolution;
    let dims = [target; 3];
    let mut values: HashMap<u64, f64> = HashMap::new();
    let mut cells_per_level = Vec::with_capacity(cfg.depth() + 1);

    let mut fetch = |corners: &mut dyn Iterator<Item = [usize; 3]>,
                     values: &mut HashMap<u64, f64>| {
        let mut pending = Vec::new();
        for c in corners {
            let key = corner_key(c, dims);
            if let std::collections::hash_map::Entry::Vacant(e) = values.entry(key) {
                e.insert(f64::NAN);
                pending.push(c);
            }
        }
        if !pending.is_empty() {
            let out = eval(&pending);
            for (c, v) in pending.iter().zip(out) {
                values.insert(corner_key(*c, dims), v);
            }
        }
    };

    let base = cfg.base_resolution;
    let mut cells: Vec<[usize; 3]> = Vec::with_capacity(base.pow(3));
    for k in 0..base {
        for j in 0..base {
            for i in 0..base {
                cells.push([i, j, k]);
            }
        }
    }
    let mut resolution = base;
    loop {
        let scale = target / resolution;
        let corners_of = |cell: [usize; 3]| {
            CORNERS.map(|o| [(cell[0] + o[0]) * scale, (cell[1] + o[1]) * scale, (cell[2] + o[2]) * scale])
        };
        fetch(&mut cells.iter().flat_map(|&c| corners_of(c)), &mut values);
        cells_per_level.push(cells.len());
        if resolution == target {
            break;
        }
        let limit = cfg.subdivision_factor * MeshingConfig::cell_diagonal(resolution);
        let mut children = Vec::new();
        for &cell in &cells {
            let near = corners_of(cell)
                .iter()
                .any(|c| (values[&corner_key(*c, dims)] - cfg.iso).abs() <= limit);
            if near {
                for o in CORNERS {
                    children.push([2 * cell[0] + o[0], 2 * cell[1] + o[1], 2 * cell[2] + o[2]]);
                }
            }
        }
        cells = children;
        resolution *= 2;
    }
    cells.sort_unstable_by_key(|c| (c[2], c[1], c[0]));
    let mesh = polygonize(
        dims,
        &cells,
        |c| values[&corner_key(c, dims)],
        |c| extraction_point(c, target),
        cfg.iso,
    );
    Ok((mesh, cells_per_level, values))
}

fn evaluate_corners(field: &dyn ScalarField, corners: &[[usize; 3]], target: usize) -> Vec<f64> {
    let points: Vec<Point3<f64>> = corners.iter().map(|c| extraction_point(*c, target)).collect();
    let mut out = vec![0.0; points.len()];
    field.evaluate(&points, &mut out);
    out
}

/// Octree extraction of the iso surface of `field`.
pub fn extract_mesh(
    field: &dyn ScalarField,
    cfg: &MeshingConfig,
) -> Result<(TriangleMesh, EvalStats), MeshingError> {
    extract_mesh_cached(field, cfg, 0).map(|(m, s, _)| (m, s))
}

/// Octree extraction that also returns every corner value, tagged with the
/// network `level` that produced them.
pub fn extract_mesh_cached(
    field: &dyn ScalarField,
    cfg: &MeshingConfig,
    level: usize,
) -> Result<(TriangleMesh, EvalStats, GridCache), MeshingError> {
    let mut evaluations = 0u64;
    let (mesh, cells_per_level, values) = octree(cfg, |corners| {
        evaluations += corners.len() as u64;
        evaluate_corners(field, corners, cfg.target_resolution)
    })?;
    let stats = EvalStats {
        network_evaluations: evaluations,
        cells_per_level,
    };
    let cache = GridCache {
        level,
        base_resolution: cfg.base_resolution,
        target_resolution: cfg.target_resolution,
        values,
    };
    Ok((mesh, stats, cache))
}

/// Re-extracts at a finer network level, querying `field` (level `to_level`)
/// only where the cached coarser value is below the reuse threshold.
/// Corners absent from the cache are evaluated too. `evals` counts
/// `field` queries only.
pub fn refine_mesh(
    field: &dyn ScalarField,
    to_level: usize,
    cache: Option<&GridCache>,
    cfg: &MeshingConfig,
) -> Result<(TriangleMesh, EvalStats), MeshingError> {
    let cache = cache.ok_or_else(|| MeshingError::MissingCache("no cached coarse grid".into()))?;
    if cache.base_resolution != cfg.base_resolution || cache.target_resolution != cfg.target_resolution {
        return Err(MeshingError::MissingCache(format!(
            "cached grid is {}→{}, requested {}→{}",
            cache.base_resolution, cache.target_resolution, cfg.base_resolution, cfg.target_resolution
        )));
    }
    if to_level <= cache.level {
        return Err(MeshingError::Config(format!(
            "refinement target level {to_level} must exceed cached level {}",
            cache.level
        )));
    }
    let tau = cfg.tau();
    let dims = [cfg.target_resolution; 3];
    let mut evaluations = 0u64;
    let (mesh, cells_per_level, _) = octree(cfg, |corners| {
        let mut out = vec![f64::NAN; corners.len()];
        let mut query = Vec::new();
        for (i, c) in corners.iter().enumerate() {
            match cache.values.get(&corner_key(*c, dims)) {
                Some(v) if (v - cfg.iso).abs() >= tau => out[i] = *v,
                _ => query.push(i),
            }
        }
        let picked: Vec<[usize; 3]> = query.iter().map(|&i| corners[i]).collect();
        evaluations += picked.len() as u64;
        for (i, v) in query.into_iter().zip(evaluate_corners(field, &picked, cfg.target_resolution)) {
            out[i] = v;
        }
        out
    })?;
    Ok((
        mesh,
        EvalStats {
            network_evaluations: evaluations,
            cells_per_level,
        },
    ))
}
