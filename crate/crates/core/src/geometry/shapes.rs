use nalgebra::{Point3, Vector3};

use super::GeometryError;

/// Half-width of the box every shape must fit in.
pub const UNIT_HALF_EXTENT: f64 = 0.5;

/// Closed-form signed distance fields used as ground truth.
///
/// Constructors validate parameters and reject shapes that leave the
/// `[-0.5, 0.5]^3` box. All fields are 1-Lipschitz; all but the smooth
/// union are exact Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticShape {
    Sphere {
        center: Point3<f64>,
        radius: f64,
    },
    Box {
        center: Point3<f64>,
        half_extents: Vector3<f64>,
    },
    /// Torus lying in the xz-plane around `center`.
    Torus {
        center: Point3<f64>,
        major_radius: f64,
        minor_radius: f64,
    },
    Capsule {
        a: Point3<f64>,
        b: Point3<f64>,
        radius: f64,
    },
    /// Polynomial smooth minimum of two shapes with blend width `k`.
    SmoothUnion {
        first: std::boxed::Box<AnalyticShape>,
        second: std::boxed::Box<AnalyticShape>,
        k: f64,
    },
}

fn positive(name: &'static str, v: f64) -> Result<(), GeometryError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidShape(format!("{name} must be positive and finite, got {v}")))
    }
}

impl AnalyticShape {
    pub fn sphere(center: Point3<f64>, radius: f64) -> Result<Self, GeometryError> {
        positive("radius", radius)?;
        Self::Sphere { center, radius }.checked()
    }

    pub fn cuboid(center: Point3<f64>, half_extents: Vector3<f64>) -> Result<Self, GeometryError> {
        for h in half_extents.iter() {
            positive("half extent", *h)?;
        }
        Self::Box {
            center,
            half_extents,
        }
        .checked()
    }

    pub fn torus(
        center: Point3<f64>,
        major_radius: f64,
        minor_radius: f64,
    ) -> Result<Self, GeometryError> {
        positive("major radius", major_radius)?;
        positive("minor radius", minor_radius)?;
        if minor_radius >= major_radius {
            return Err(GeometryError::InvalidShape(
                "torus minor radius must be smaller than major radius".into(),
            ));
        }
        Self::Torus {
            center,
            major_radius,
            minor_radius,
        }
        .checked()
    }

    pub fn capsule(a: Point3<f64>, b: Point3<f64>, radius: f64) -> Result<Self, GeometryError> {
        positive("radius", radius)?;
        Self::Capsule { a, b, radius }.checked()
    }

    pub fn smooth_union(first: Self, second: Self, k: f64) -> Result<Self, GeometryError> {
        positive("blend width", k)?;
        Self::SmoothUnion {
            first: std::boxed::Box::new(first),
            second: std::boxed::Box::new(second),
            k,
        }
        .checked()
    }

    fn checked(self) -> Result<Self, GeometryError> {
        let (lo, hi) = self.bounds();
        let fits = (0..3).all(|d| {
            lo[d] >= -UNIT_HALF_EXTENT && hi[d] <= UNIT_HALF_EXTENT && lo[d].is_finite()
        });
        if fits {
            Ok(self)
        } else {
            Err(GeometryError::InvalidShape(format!(
                "shape bounds {:?}..{:?} leave the unit box",
                lo.coords.as_slice(),
                hi.coords.as_slice()
            )))
        }
    }

    /// Conservative axis-aligned bounds of the interior.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        match self {
            Self::Sphere { center, radius } => {
                let r = Vector3::repeat(*radius);
                (center - r, center + r)
            }
            Self::Box {
                center,
                half_extents,
            } => (center - half_extents, center + half_extents),
            Self::Torus {
                center,
                major_radius,
                minor_radius,
            } => {
                let e = Vector3::new(major_radius + minor_radius, *minor_radius, major_radius + minor_radius);
                (center - e, center + e)
            }
            Self::Capsule { a, b, radius } => {
                let r = Vector3::repeat(*radius);
                (a.inf(b) - r, a.sup(b) + r)
            }
            Self::SmoothUnion { first, second, k } => {
                // smin(a, b) >= min(a, b) - k/4
                let (l1, h1) = first.bounds();
                let (l2, h2) = second.bounds();
                let pad = Vector3::repeat(k / 4.0);
                (l1.inf(&l2) - pad, h1.sup(&h2) + pad)
            }
        }
    }

    /// Signed distance at `p`, negative inside.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        match self {
            Self::Sphere { center, radius } => (p - center).norm() - radius,
            Self::Box {
                center,
                half_extents,
            } => {
                let q = (p - center).abs() - half_extents;
                let outside = q.map(|c| c.max(0.0)).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
            Self::Torus {
                center,
                major_radius,
                minor_radius,
            } => {
                let d = p - center;
                let ring = (d.x * d.x + d.z * d.z).sqrt() - major_radius;
                (ring * ring + d.y * d.y).sqrt() - minor_radius
            }
            Self::Capsule { a, b, radius } => {
                let ab = b - a;
                let ap = p - a;
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 {
                    (ap.dot(&ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (ap - ab * t).norm() - radius
            }
            Self::SmoothUnion { first, second, k } => {
                let d1 = first.distance(p);
                let d2 = second.distance(p);
                let h = (0.5 + 0.5 * (d2 - d1) / k).clamp(0.0, 1.0);
                d2 + (d1 - d2) * h - k * h * (1.0 - h)
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Sphere { .. } => "sphere",
            Self::Box { .. } => "box",
            Self::Torus { .. } => "torus",
            Self::Capsule { .. } => "capsule",
            Self::SmoothUnion { .. } => "smooth_union",
        }
    }
}

/// The eight analytic training shapes used for desk-scale experiments.
pub fn desk_shapes() -> Vec<(&'static str, AnalyticShape)> {
    let o = Point3::origin();
    let shapes = [
        ("sphere", AnalyticShape::sphere(o, 0.35)),
        ("small_sphere", AnalyticShape::sphere(Point3::new(0.1, 0.05, -0.05), 0.25)),
        ("slab", AnalyticShape::cuboid(o, Vector3::new(0.3, 0.2, 0.25))),
        ("pillar", AnalyticShape::cuboid(Point3::new(0.0, 0.05, 0.0), Vector3::new(0.15, 0.35, 0.15))),
        ("torus", AnalyticShape::torus(o, 0.28, 0.1)),
        (
            "capsule",
            AnalyticShape::capsule(Point3::new(-0.25, -0.2, 0.0), Point3::new(0.25, 0.2, 0.0), 0.12),
        ),
        (
            "tilted_capsule",
            AnalyticShape::capsule(Point3::new(0.0, -0.28, 0.1), Point3::new(0.05, 0.28, -0.1), 0.15),
        ),
        (
            "blob",
            AnalyticShape::sphere(Point3::new(-0.15, 0.0, 0.0), 0.2).and_then(|a| {
                AnalyticShape::smooth_union(a, AnalyticShape::sphere(Point3::new(0.17, 0.05, 0.0), 0.18)?, 0.06)
            }),
        ),
    ];
    shapes
        .into_iter()
        .map(|(name, s)| (name, s.expect("valid desk shape")))
        .collect()
}

/// A shape kept out of training, for latent fitting and completion.
pub fn held_out_shape() -> AnalyticShape {
    AnalyticShape::sphere(Point3::new(0.03, -0.02, 0.02), 0.3).expect("valid shape")
}
