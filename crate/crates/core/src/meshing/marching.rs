use std::collections::HashMap;

use nalgebra::Point3;

use super::tables::{CORNERS, EDGES, TRIANGLES};
use super::{ScalarField, EXTRACTION_HALF_EXTENT};
use crate::geometry::TriangleMesh;

/// Corner values exactly at the iso level are nudged by this much so every
/// edge crossing is unambiguous.
pub const ZERO_PERTURBATION: f64 = 1e-9;

/// Corner samples of a regular grid, `x` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    /// Cells per axis; there are `cells + 1` corners per axis.
    pub cells: [usize; 3],
    pub origin: Point3<f64>,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn corner_count(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        (c[2] * (self.cells[1] + 1) + c[1]) * (self.cells[0] + 1) + c[0]
    }

    pub fn position(&self, c: [usize; 3]) -> Point3<f64> {
        Point3::new(
            self.origin.x + c[0] as f64 * self.spacing,
            self.origin.y + c[1] as f64 * self.spacing,
            self.origin.z + c[2] as f64 * self.spacing,
        )
    }
}

/// Position of corner `c` on the cubic extraction grid with `resolution`
/// cells per axis. Octree and dense extraction both go through here so
/// their coordinates agree bit for bit.
pub fn extraction_point(c: [usize; 3], resolution: usize) -> Point3<f64> {
    let h = 2.0 * EXTRACTION_HALF_EXTENT / resolution as f64;
    Point3::new(
        -EXTRACTION_HALF_EXTENT + c[0] as f64 * h,
        -EXTRACTION_HALF_EXTENT + c[1] as f64 * h,
        -EXTRACTION_HALF_EXTENT + c[2] as f64 * h,
    )
}

/// Linear key of a corner on a grid with `cells` cells per axis.
pub(crate) fn corner_key(c: [usize; 3], cells: [usize; 3]) -> u64 {
    ((c[2] as u64 * (cells[1] as u64 + 1)) + c[1] as u64) * (cells[0] as u64 + 1) + c[0] as u64
}

/// Marching cubes over `cells` (lower-corner indices), visited in the given
/// order. Vertices are numbered by first appearance and shared across
/// cells through their edge key, so two calls with the same cell order and
/// values produce identical meshes.
pub(crate) fn polygonize(
    dims: [usize; 3],
    cells: &[[usize; 3]],
    value: impl Fn([usize; 3]) -> f64,
    position: impl Fn([usize; 3]) -> Point3<f64>,
    iso: f64,
) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut edge_vertex: HashMap<u64, u32> = HashMap::new();
    let level = |c: [usize; 3]| {
        let v = value(c);
        if v == iso {
            iso + ZERO_PERTURBATION
        } else {
            v
        }
    };
    for &cell in cells {
        let corners = CORNERS.map(|o| [cell[0] + o[0], cell[1] + o[1], cell[2] + o[2]]);
        let values = corners.map(level);
        let mut case = 0usize;
        for (bit, v) in values.iter().enumerate() {
            if *v < iso {
                case |= 1 << bit;
            }
        }
        if case == 0 || case == 255 {
            continue;
        }
        let row = &TRIANGLES[case];
        let mut local = [u32::MAX; 12];
        for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
            let mut ids = [0u32; 3];
            for (slot, &e) in ids.iter_mut().zip(tri) {
                let e = e as usize;
                if local[e] == u32::MAX {
                    let [a, b] = EDGES[e];
                    // orient every edge from its lower corner
                    let (lo, hi) = if corners[a] <= corners[b] { (a, b) } else { (b, a) };
                    let (ca, cb) = (corners[lo], corners[hi]);
                    let axis = (0..3).find(|&k| ca[k] != cb[k]).expect("edge spans one axis");
                    let key = corner_key(ca, dims) * 3 + axis as u64;
                    local[e] = *edge_vertex.entry(key).or_insert_with(|| {
                        let (va, vb) = (values[lo], values[hi]);
                        let t = (iso - va) / (vb - va);
                        let (pa, pb) = (position(ca), position(cb));
                        vertices.push(pa + (pb - pa) * t);
                        (vertices.len() - 1) as u32
                    });
                }
                *slot = local[e];
            }
            // table order winds toward the inside; swap to face outward
            triangles.push([ids[0], ids[2], ids[1]]);
        }
    }
    TriangleMesh {
        vertices,
        triangles,
    }
}

/// Extracts the `iso` level set of a sampled grid. Triangles wind
/// counter-clockwise seen from the side where the field exceeds `iso`.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> TriangleMesh {
    let [nx, ny, nz] = grid.cells;
    let mut cells = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                cells.push([i, j, k]);
            }
        }
    }
    polygonize(
        grid.cells,
        &cells,
        |c| grid.values[grid.index(c)],
        |c| grid.position(c),
        iso,
    )
}

/// Samples `field` on the full extraction grid.
pub fn sample_extraction_grid(field: &dyn ScalarField, resolution: usize) -> ScalarGrid {
    let n = resolution + 1;
    let mut values = vec![0.0; n * n * n];
    let mut slab = Vec::with_capacity(n * n);
    for k in 0..n {
        slab.clear();
        for j in 0..n {
            for i in 0..n {
                slab.push(extraction_point([i, j, k], resolution));
            }
        }
        field.evaluate(&slab, &mut values[k * n * n..(k + 1) * n * n]);
    }
    ScalarGrid {
        cells: [resolution; 3],
        origin: extraction_point([0, 0, 0], resolution),
        spacing: 2.0 * EXTRACTION_HALF_EXTENT / resolution as f64,
        values,
    }
}

/// Full-grid extraction of the zero level set: the reference the octree is
/// checked against.
pub fn extract_mesh_dense(field: &dyn ScalarField, resolution: usize) -> TriangleMesh {
    let grid = sample_extraction_grid(field, resolution);
    let cells_per_axis = resolution;
    let mut cells = Vec::with_capacity(cells_per_axis.pow(3));
    for k in 0..cells_per_axis {
        for j in 0..cells_per_axis {
            for i in 0..cells_per_axis {
                cells.push([i, j, k]);
            }
        }
    }
    polygonize(
        grid.cells,
        &cells,
        |c| grid.values[grid.index(c)],
        |c| extraction_point(c, resolution),
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnalyticShape;

    fn single_cell(values: [f64; 8]) -> ScalarGrid {
        let mut grid = ScalarGrid {
            cells: [1, 1, 1],
            origin: Point3::origin(),
            spacing: 1.0,
            values: vec![0.0; 8],
        };
        for (c, v) in CORNERS.iter().zip(values) {
            let idx = grid.index(*c);
            grid.values[idx] = v;
        }
        grid
    }

    #[test]
    fn all_positive_is_empty() {
        assert!(marching_cubes(&single_cell([1.0; 8]), 0.0).is_empty());
        assert!(marching_cubes(&single_cell([-1.0; 8]), 0.0).is_empty());
    }

    #[test]
    fn one_negative_corner_gives_one_triangle() {
        let mut v = [1.0; 8];
        v[0] = -1.0;
        let m = marching_cubes(&single_cell(v), 0.0);
        assert_eq!(m.triangles.len(), 1);
        for p in &m.vertices {
            // crossing at the midpoint of each edge leaving corner 0
            assert!((p.coords.sum() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_vertices_near_radius() {
        let s = AnalyticShape::sphere(Point3::origin(), 0.4).unwrap();
        let m = extract_mesh_dense(&s, 64);
        let diag = 3f64.sqrt() * 1.1 / 64.0;
        assert!(!m.is_empty());
        for p in &m.vertices {
            assert!((p.coords.norm() - 0.4).abs() <= diag);
        }
        assert!(m.is_watertight());
    }

    #[test]
    fn exact_zero_corners_are_perturbed() {
        let mut v = [1.0; 8];
        v[0] = 0.0;
        v[1] = -1.0;
        let m = marching_cubes(&single_cell(v), 0.0);
        assert!(m.vertices.iter().all(|p| p.coords.iter().all(|c| c.is_finite())));
        assert!(!m.is_empty());
    }
}
