//! Mesh and slice queries shared by the CLI and the HTTP service.

use lodsdf::geometry::TriangleMesh;
use lodsdf::meshing::{
    extract_mesh, extract_mesh_cached, refine_mesh, EvalStats, MeshingConfig, NetworkField, ScalarField,
    EXTRACTION_HALF_EXTENT,
};
use lodsdf::network::LatentCode;
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::{Checkpoint, ServiceError};

/// Where a query's latent code comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatentSource {
    ShapeId(usize),
    Latent(Vec<f64>),
    /// `(1 - t) · l_a + t · l_b` between two codebook rows.
    Interpolate { a: usize, b: usize, t: f64 },
}

impl LatentSource {
    pub fn resolve(&self, ckpt: &Checkpoint) -> Result<Vec<f64>, ServiceError> {
        let latent = match self {
            Self::ShapeId(id) => ckpt.latent(*id)?.to_vec(),
            Self::Latent(l) => l.clone(),
            Self::Interpolate { a, b, t } => {
                if !t.is_finite() {
                    return Err(ServiceError::Invalid(format!("interpolation weight {t} is not finite")));
                }
                LatentCode::lerp(ckpt.latent(*a)?, ckpt.latent(*b)?, *t).0
            }
        };
        if latent.len() != ckpt.params.latent_dim() {
            return Err(ServiceError::Invalid(format!(
                "latent has {} entries, model expects {}",
                latent.len(),
                ckpt.params.latent_dim()
            )));
        }
        if latent.iter().any(|v| !v.is_finite()) {
            return Err(ServiceError::Invalid("latent contains non-finite values".into()));
        }
        Ok(latent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshRequest {
    pub source: LatentSource,
    pub level: usize,
    pub resolution: usize,
    /// Coarser level whose grid values are reused where far from the surface.
    #[serde(default)]
    pub refine_from: Option<usize>,
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshResponse {
    pub mesh: TriangleMesh,
    /// Queries of the requested level.
    pub stats: EvalStats,
    /// Queries of the coarse level when refining.
    pub coarse_stats: Option<EvalStats>,
}

fn check_level(ckpt: &Checkpoint, level: usize) -> Result<(), ServiceError> {
    let max = ckpt.params.config.heads();
    if level == 0 || level > max {
        return Err(ServiceError::Invalid(format!("level {level} out of range 1..={max}")));
    }
    Ok(())
}

fn check_resolution(resolution: usize, max: usize) -> Result<(), ServiceError> {
    if resolution > max {
        return Err(ServiceError::TooLarge { requested: resolution, max });
    }
    if resolution == 0 {
        return Err(ServiceError::Invalid("resolution must be positive".into()));
    }
    Ok(())
}

pub fn mesh_query(ckpt: &Checkpoint, req: &MeshRequest, max_resolution: usize) -> Result<MeshResponse, ServiceError> {
    check_level(ckpt, req.level)?;
    check_resolution(req.resolution, max_resolution)?;
    let latent = req.source.resolve(ckpt)?;
    let cfg = MeshingConfig {
        reuse_threshold: req.tau,
        ..MeshingConfig::with_resolution(req.resolution)
    };
    cfg.validate()?;
    let field = NetworkField::new(&ckpt.params, &latent, req.level)?;
    match req.refine_from {
        None => {
            if req.tau.is_some() {
                return Err(ServiceError::Invalid("tau only applies together with refine_from".into()));
            }
            let (mesh, stats) = extract_mesh(&field, &cfg)?;
            Ok(MeshResponse {
                mesh,
                stats,
                coarse_stats: None,
            })
        }
        Some(from) => {
            check_level(ckpt, from)?;
            if from >= req.level {
                return Err(ServiceError::Invalid(format!(
                    "refine_from {from} must be below the requested level {}",
                    req.level
                )));
            }
            let coarse = NetworkField::new(&ckpt.params, &latent, from)?;
            let (_, coarse_stats, cache) = extract_mesh_cached(&coarse, &cfg, from)?;
            let (mesh, stats) = refine_mesh(&field, req.level, Some(&cache), &cfg)?;
            Ok(MeshResponse {
                mesh,
                stats,
                coarse_stats: Some(coarse_stats),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceRequest {
    pub source: LatentSource,
    pub level: usize,
    /// Normal axis of the slice plane: 0, 1 or 2.
    pub axis: usize,
    pub offset: f64,
    pub res: usize,
}

/// Field values on a `res × res` grid spanning the extraction box in the
/// plane `x[axis] = offset`. Row-major: the second in-plane axis varies
/// slowest.
pub fn slice_query(ckpt: &Checkpoint, req: &SliceRequest, max_resolution: usize) -> Result<Vec<f32>, ServiceError> {
    check_level(ckpt, req.level)?;
    check_resolution(req.res, max_resolution)?;
    if req.res < 2 {
        return Err(ServiceError::Invalid("slice resolution must be at least 2".into()));
    }
    if req.axis > 2 {
        return Err(ServiceError::Invalid(format!("axis {} must be 0, 1 or 2", req.axis)));
    }
    if !req.offset.is_finite() {
        return Err(ServiceError::Invalid("offset must be finite".into()));
    }
    let latent = req.source.resolve(ckpt)?;
    let field = NetworkField::new(&ckpt.params, &latent, req.level)?;
    let (u, v) = ((req.axis + 1) % 3, (req.axis + 2) % 3);
    let step = 2.0 * EXTRACTION_HALF_EXTENT / (req.res - 1) as f64;
    let points: Vec<Point3<f64>> = (0..req.res * req.res)
        .map(|k| {
            let mut p = Point3::origin();
            p[req.axis] = req.offset;
            p[u] = -EXTRACTION_HALF_EXTENT + (k % req.res) as f64 * step;
            p[v] = -EXTRACTION_HALF_EXTENT + (k / req.res) as f64 * step;
            p
        })
        .collect();
    let mut values = vec![0.0; points.len()];
    field.evaluate(&points, &mut values);
    Ok(values.into_iter().map(|v| v as f32).collect())
}
