use std::io::{Read, Write};

use nalgebra::{Point3, Vector3};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use super::{AnalyticShape, GeometryError, MeshSdf, TriangleMesh};
use crate::meshing::{extract_mesh_dense, ScalarField};

/// Half-width of the box uniform samples are drawn from.
pub const SAMPLE_BOX_HALF_EXTENT: f64 = 0.55;
/// Standard deviations of the two near-surface perturbations.
pub const NEAR_SURFACE_SIGMAS: [f64; 2] = [0.0025, 0.025];
/// Share of samples drawn uniformly in the padded box.
pub const UNIFORM_SHARE: f64 = 0.05;

const SAMPLES_MAGIC: &[u8; 4] = b"SDFS";
const SAMPLES_VERSION: u32 = 1;

/// A ground-truth signed distance function.
pub trait SdfOracle: Sync {
    fn signed_distance(&self, p: &Point3<f64>) -> f64;

    /// Points on the zero level set, deterministic in `seed`.
    fn surface_points(&self, n: usize, seed: u64) -> Result<Vec<Point3<f64>>, GeometryError>;
}

/// Stream-split RNG: one independent ChaCha stream per index.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl ScalarField for AnalyticShape {
    fn evaluate(&self, points: &[Point3<f64>], out: &mut [f64]) {
        for (p, o) in points.iter().zip(out.iter_mut()) {
            *o = self.distance(p);
        }
    }
}

impl ScalarField for MeshSdf {
    fn evaluate(&self, points: &[Point3<f64>], out: &mut [f64]) {
        out.par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(o, p)| *o = self.distance(p));
    }
}

/// Resolution of the helper mesh used to seed analytic surface samples.
const ANALYTIC_SEED_RESOLUTION: usize = 96;

fn project_to_zero_set(shape: &AnalyticShape, p: Point3<f64>) -> Point3<f64> {
    const H: f64 = 1e-6;
    let mut p = p;
    for _ in 0..8 {
        let d = shape.distance(&p);
        if d.abs() < 1e-12 {
            break;
        }
        let grad = Vector3::new(
            shape.distance(&(p + Vector3::x() * H)) - shape.distance(&(p - Vector3::x() * H)),
            shape.distance(&(p + Vector3::y() * H)) - shape.distance(&(p - Vector3::y() * H)),
            shape.distance(&(p + Vector3::z() * H)) - shape.distance(&(p - Vector3::z() * H)),
        ) / (2.0 * H);
        let g2 = grad.norm_squared();
        if g2 < 1e-12 {
            break;
        }
        p -= grad * (d / g2);
    }
    p
}

impl SdfOracle for AnalyticShape {
    fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.distance(p)
    }

    /// Area-uniform samples on a fine marching-cubes mesh, projected onto
    /// the exact zero set.
    fn surface_points(&self, n: usize, seed: u64) -> Result<Vec<Point3<f64>>, GeometryError> {
        let mesh = extract_mesh_dense(self, ANALYTIC_SEED_RESOLUTION);
        let seeds = sample_surface_points(&mesh, n, seed)?;
        Ok(seeds
            .into_iter()
            .map(|p| project_to_zero_set(self, p))
            .collect())
    }
}

impl SdfOracle for MeshSdf {
    fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.distance(p)
    }

    fn surface_points(&self, n: usize, seed: u64) -> Result<Vec<Point3<f64>>, GeometryError> {
        sample_surface_points(self.mesh(), n, seed)
    }
}

/// Area-uniform points on a mesh: triangle chosen proportional to area,
/// then a uniform barycentric point inside it.
pub fn sample_surface_points(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<Vec<Point3<f64>>, GeometryError> {
    if mesh.triangles.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let areas: Vec<f64> = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).collect();
    let picker = WeightedIndex::new(&areas).map_err(|_| GeometryError::EmptyMesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let t = picker.sample(&mut rng);
            let [a, b, c] = mesh.corners(t);
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let s = r1.sqrt();
            let (u, v, w) = (1.0 - s, s * (1.0 - r2), s * r2);
            Point3::from(a.coords * u + b.coords * v + c.coords * w)
        })
        .collect();
    Ok(points)
}

/// One labeled ground-truth sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfSample {
    pub position: Point3<f64>,
    pub distance: f64,
}

/// Ground-truth samples split into near-surface (`fine`) and far (`coarse`)
/// subsets by distance rank.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdfSampleSet {
    pub fine: Vec<SdfSample>,
    pub coarse: Vec<SdfSample>,
    pub shape_id: usize,
}

impl SdfSampleSet {
    pub fn len(&self) -> usize {
        self.fine.len() + self.coarse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fine.is_empty() && self.coarse.is_empty()
    }

    /// Keeps only samples whose position satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(&Point3<f64>) -> bool) -> Self {
        Self {
            fine: self.fine.iter().filter(|s| keep(&s.position)).copied().collect(),
            coarse: self.coarse.iter().filter(|s| keep(&s.position)).copied().collect(),
            shape_id: self.shape_id,
        }
    }

    /// Little-endian `SDFS` record file, fine samples first.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(SAMPLES_MAGIC)?;
        w.write_all(&SAMPLES_VERSION.to_le_bytes())?;
        w.write_all(&(self.fine.len() as u64).to_le_bytes())?;
        w.write_all(&(self.coarse.len() as u64).to_le_bytes())?;
        for s in self.fine.iter().chain(&self.coarse) {
            for v in [s.position.x, s.position.y, s.position.z, s.distance] {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read, shape_id: usize) -> Result<Self, GeometryError> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)
            .map_err(|_| GeometryError::SampleFormat("truncated header".into()))?;
        if &header[0..4] != SAMPLES_MAGIC {
            return Err(GeometryError::SampleFormat("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != SAMPLES_VERSION {
            return Err(GeometryError::SampleFormat(format!("unsupported version {version}")));
        }
        let n_fine = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let n_coarse = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
        let mut read_records = |n: usize| -> Result<Vec<SdfSample>, GeometryError> {
            let mut buf = vec![0u8; n.checked_mul(16).ok_or_else(|| {
                GeometryError::SampleFormat("record count overflow".into())
            })?];
            r.read_exact(&mut buf)
                .map_err(|_| GeometryError::SampleFormat("truncated records".into()))?;
            Ok(buf
                .chunks_exact(16)
                .map(|c| {
                    let f = |i: usize| f32::from_le_bytes(c[i * 4..i * 4 + 4].try_into().unwrap()) as f64;
                    SdfSample {
                        position: Point3::new(f(0), f(1), f(2)),
                        distance: f(3),
                    }
                })
                .collect())
        };
        let fine = read_records(n_fine)?;
        let coarse = read_records(n_coarse)?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).unwrap_or(0) != 0 {
            return Err(GeometryError::SampleFormat("trailing bytes after records".into()));
        }
        Ok(Self {
            fine,
            coarse,
            shape_id,
        })
    }
}

/// Draws `n_total` labeled samples: near-surface points perturbed by two
/// Gaussian widths plus a uniform share in the padded box, sorted by
/// `|s|` and split so the closest `fine_fraction` become fine samples.
pub fn sample_training_set(
    oracle: &dyn SdfOracle,
    n_total: usize,
    fine_fraction: f64,
    seed: u64,
) -> Result<SdfSampleSet, GeometryError> {
    if n_total < 20 {
        return Err(GeometryError::InvalidSampling(format!(
            "need at least 20 samples, got {n_total}"
        )));
    }
    if !(fine_fraction > 0.0 && fine_fraction < 1.0) {
        return Err(GeometryError::InvalidSampling(format!(
            "fine fraction must lie in (0, 1), got {fine_fraction}"
        )));
    }
    let n_uniform = (n_total as f64 * UNIFORM_SHARE).round() as usize;
    let n_near = n_total - n_uniform;
    let anchors = oracle.surface_points(n_near, seed ^ 0x5eed_5eed)?;

    let near_sigma = [
        Normal::new(0.0, NEAR_SURFACE_SIGMAS[0]).unwrap(),
        Normal::new(0.0, NEAR_SURFACE_SIGMAS[1]).unwrap(),
    ];
    let mut samples: Vec<SdfSample> = (0..n_total)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let position = if i < n_near {
                let noise = &near_sigma[i % 2];
                anchors[i]
                    + Vector3::new(
                        noise.sample(&mut rng),
                        noise.sample(&mut rng),
                        noise.sample(&mut rng),
                    )
            } else {
                let h = SAMPLE_BOX_HALF_EXTENT;
                Point3::new(
                    rng.random_range(-h..h),
                    rng.random_range(-h..h),
                    rng.random_range(-h..h),
                )
            };
            SdfSample {
                position,
                distance: oracle.signed_distance(&position),
            }
        })
        .collect();

    // stable sort keeps ties in generation order
    samples.sort_by(|a, b| a.distance.abs().total_cmp(&b.distance.abs()));
    let n_fine = (fine_fraction * n_total as f64).round() as usize;
    let coarse = samples.split_off(n_fine);
    Ok(SdfSampleSet {
        fine: samples,
        coarse,
        shape_id: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> AnalyticShape {
        AnalyticShape::sphere(Point3::origin(), 0.4).unwrap()
    }

    #[test]
    fn fine_coarse_counts_and_partition() {
        let set = sample_training_set(&sphere(), 10_000, 0.05, 3).unwrap();
        assert_eq!(set.fine.len(), 500);
        assert_eq!(set.coarse.len(), 9500);
        let max_fine = set.fine.iter().map(|s| s.distance.abs()).fold(0.0, f64::max);
        let min_coarse = set.coarse.iter().map(|s| s.distance.abs()).fold(f64::INFINITY, f64::min);
        assert!(max_fine <= min_coarse);
    }

    #[test]
    fn samples_are_deterministic_in_seed() {
        let a = sample_training_set(&sphere(), 2_000, 0.05, 9).unwrap();
        let b = sample_training_set(&sphere(), 2_000, 0.05, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_training_set(&sphere(), 2_000, 0.05, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn labels_match_oracle() {
        let s = sphere();
        let set = sample_training_set(&s, 500, 0.1, 1).unwrap();
        for smp in set.fine.iter().chain(&set.coarse) {
            assert_eq!(smp.distance, s.distance(&smp.position));
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(sample_training_set(&sphere(), 19, 0.05, 0).is_err());
        assert!(sample_training_set(&sphere(), 100, 0.0, 0).is_err());
        assert!(sample_training_set(&sphere(), 100, 1.0, 0).is_err());
    }

    #[test]
    fn analytic_surface_points_lie_on_surface() {
        let shape = AnalyticShape::cuboid(Point3::origin(), Vector3::new(0.3, 0.2, 0.25)).unwrap();
        let pts = shape.surface_points(2_000, 4).unwrap();
        assert_eq!(pts.len(), 2_000);
        for p in pts {
            assert!(shape.distance(&p).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn single_triangle_samples_stay_inside() {
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let pts = sample_surface_points(&mesh, 3, 5).unwrap();
        assert_eq!(pts.len(), 3);
        for p in &pts {
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0 + 1e-12 && p.z == 0.0);
        }
        assert_eq!(pts, sample_surface_points(&mesh, 3, 5).unwrap());
    }

    #[test]
    fn area_weighted_triangle_choice() {
        // areas 9 : 1, disjoint in x
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(3.0, 0.0, 0.0),
                Point3::new(0.0, 6.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(11.0, 0.0, 0.0),
                Point3::new(10.0, 2.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let n = 10_000;
        let pts = sample_surface_points(&mesh, n, 17).unwrap();
        let big = pts.iter().filter(|p| p.x < 5.0).count() as f64;
        let sigma = (n as f64 * 0.9 * 0.1).sqrt();
        assert!((big - 9000.0).abs() < 3.0 * sigma, "{big}");
    }

    #[test]
    fn empty_mesh_is_an_error() {
        assert!(sample_surface_points(&TriangleMesh::default(), 3, 0).is_err());
    }

    #[test]
    fn binary_round_trip_and_corruption() {
        let set = sample_training_set(&sphere(), 200, 0.05, 2).unwrap();
        let mut buf = Vec::new();
        set.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 200 * 16);
        assert_eq!(&buf[0..4], b"SDFS");
        let back = SdfSampleSet::read_from(buf.as_slice(), 0).unwrap();
        assert_eq!(back.fine.len(), 10);
        for (a, b) in set.fine.iter().chain(&set.coarse).zip(back.fine.iter().chain(&back.coarse)) {
            assert_eq!(a.distance as f32 as f64, b.distance);
        }
        assert!(SdfSampleSet::read_from(&buf[..buf.len() - 1], 0).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(SdfSampleSet::read_from(bad.as_slice(), 0).is_err());
    }
}
