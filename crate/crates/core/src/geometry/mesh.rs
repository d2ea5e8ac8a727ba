use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::GeometryError;

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        let mesh = Self {
            vertices,
            triangles,
        };
        mesh.check_indices()?;
        Ok(mesh)
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn check_indices(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle {t} references a vertex out of range ({n} vertices)"
                )));
            }
        }
        Ok(())
    }

    pub fn corners(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Number of triangles using each undirected edge.
    pub fn edge_use_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_use_counts().values().all(|&c| c == 2)
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Axis-aligned unit cube `[-0.5, 0.5]^3` with outward winding.
    pub fn unit_cube() -> Self {
        let vertices = (0..8)
            .map(|i| {
                Point3::new(
                    if i & 1 == 0 { -0.5 } else { 0.5 },
                    if i & 2 == 0 { -0.5 } else { 0.5 },
                    if i & 4 == 0 { -0.5 } else { 0.5 },
                )
            })
            .collect();
        let triangles = vec![
            [0, 2, 3],
            [0, 3, 1],
            [4, 5, 7],
            [4, 7, 6],
            [0, 1, 5],
            [0, 5, 4],
            [2, 6, 7],
            [2, 7, 3],
            [0, 4, 6],
            [0, 6, 2],
            [1, 3, 7],
            [1, 7, 5],
        ];
        Self {
            vertices,
            triangles,
        }
    }

    /// Subdivided icosahedron projected onto the sphere of `radius`.
    pub fn icosphere(radius: f64, subdivisions: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point3<f64>> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Point3::from(Vector3::new(x, y, z).normalize()))
        .collect();
        let mut triangles: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
            let mut next = Vec::with_capacity(triangles.len() * 4);
            let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Point3<f64>>| -> u32 {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let m = (verts[a as usize].coords + verts[b as usize].coords).normalize();
                    verts.push(Point3::from(m));
                    (verts.len() - 1) as u32
                })
            };
            for [a, b, c] in triangles {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            triangles = next;
        }
        for v in &mut vertices {
            *v = Point3::from(v.coords * radius);
        }
        Self {
            vertices,
            triangles,
        }
    }
}

/// Closest point on triangle `abc` to `p`, by Voronoi-region classification.
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Möller–Trumbore intersection; true if the ray hits the triangle at `t > 0`.
fn ray_hits_triangle(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> bool {
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    inv * e2.dot(&q) > 0.0
}

/// Fixed, slightly irrational directions so rays rarely graze edges.
const RAY_DIRECTIONS: [[f64; 3]; 3] = [
    [0.913_545_457_642_6, 0.323_606_797_749_9, 0.246_979_603_717_5],
    [-0.271_828_182_845_9, 0.951_056_516_295_2, 0.141_421_356_237_3],
    [0.173_205_080_756_9, -0.301_029_995_663_9, 0.937_903_953_071_2],
];

/// Signed distance to a watertight triangle mesh.
#[derive(Debug, Clone)]
pub struct MeshSdf {
    mesh: TriangleMesh,
    directions: [Vector3<f64>; 3],
}

impl MeshSdf {
    pub fn new(mesh: TriangleMesh) -> Result<Self, GeometryError> {
        mesh.check_indices()?;
        if !mesh.is_watertight() {
            return Err(GeometryError::NotWatertight);
        }
        let directions = RAY_DIRECTIONS.map(|d| Vector3::from(d).normalize());
        Ok(Self { mesh, directions })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn unsigned_distance(&self, p: &Point3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for t in 0..self.mesh.triangles.len() {
            let [a, b, c] = self.mesh.corners(t);
            let d2 = (closest_point_on_triangle(p, &a, &b, &c) - p).norm_squared();
            best = best.min(d2);
        }
        best.sqrt()
    }

    /// Majority vote over three ray-parity tests.
    pub fn is_inside(&self, p: &Point3<f64>) -> bool {
        let votes = self
            .directions
            .iter()
            .filter(|dir| {
                let crossings = (0..self.mesh.triangles.len())
                    .filter(|&t| {
                        let [a, b, c] = self.mesh.corners(t);
                        ray_hits_triangle(p, dir, &a, &b, &c)
                    })
                    .count();
                crossings % 2 == 1
            })
            .count();
        votes >= 2
    }

    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let d = self.unsigned_distance(p);
        if self.is_inside(p) {
            -d
        } else {
            d
        }
    }
}
