use std::collections::HashMap;

use crate::geometry::TriangleMesh;

use super::MetricsError;

/// Scale applied to surface regularity.
pub const REGULARITY_SCALE: f64 = 1e3;

/// Mean displacement of one uniform Laplacian smoothing step, scaled by
/// 10³. Each vertex moves to the average of its 1-ring neighbours; only
/// vertices with a closed 1-ring count (isolated and boundary vertices are
/// skipped).
pub fn surface_regularity(mesh: &TriangleMesh) -> Result<f64, MetricsError> {
    let n = mesh.vertices.len();
    let mut neighbours: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut edge_use: HashMap<(u32, u32), u32> = HashMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            neighbours[a as usize].push(b);
            neighbours[b as usize].push(a);
            *edge_use.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut on_boundary = vec![false; n];
    for (&(a, b), &count) in &edge_use {
        if count == 1 {
            on_boundary[a as usize] = true;
            on_boundary[b as usize] = true;
        }
    }
    let mut sum = 0.0;
    let mut counted = 0usize;
    for (v, ring) in neighbours.iter_mut().enumerate() {
        if ring.is_empty() || on_boundary[v] {
            continue;
        }
        ring.sort_unstable();
        ring.dedup();
        let centroid = ring
            .iter()
            .map(|&u| mesh.vertices[u as usize].coords)
            .sum::<nalgebra::Vector3<f64>>()
            / ring.len() as f64;
        sum += (centroid - mesh.vertices[v].coords).norm();
        counted += 1;
    }
    if counted == 0 {
        return Err(MetricsError::EmptyInput("surface regularity needs an interior vertex"));
    }
    Ok(sum / counted as f64 * REGULARITY_SCALE)
}
