use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::kdtree::{squared_distance, KdTree};
use super::MetricsError;

/// Scale applied to Chamfer distances.
pub const CHAMFER_SCALE: f64 = 1e5;
/// Scale applied to Earth mover's distances.
pub const EMD_SCALE: f64 = 1e4;
/// Largest point count solved by exact assignment.
pub const EXACT_EMD_LIMIT: usize = 512;

/// Mean over `from` of the squared distance to the nearest point of `to`.
fn one_sided(from: &[Point3<f64>], to: &KdTree) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|p| to.nearest(p).expect("non-empty").1)
        .sum();
    sum / from.len() as f64
}

/// Symmetric mean squared nearest-neighbour distance, scaled by 10⁵.
pub fn chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput("chamfer distance needs two non-empty point sets"));
    }
    let (ta, tb) = (KdTree::new(a), KdTree::new(b));
    Ok((one_sided(a, &tb) + one_sided(b, &ta)) * CHAMFER_SCALE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmdResult {
    /// Mean matched Euclidean distance, scaled by 10⁴.
    pub value: f64,
    /// True when computed by entropic transport rather than exact matching.
    pub approximate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub eps_start: f64,
    pub eps_end: f64,
    pub iterations: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            eps_start: 0.1,
            eps_end: 0.001,
            iterations: 200,
        }
    }
}

fn check_sizes(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput("earth mover's distance needs non-empty point sets"));
    }
    Ok(())
}

/// Exact assignment for up to [`EXACT_EMD_LIMIT`] points, entropic
/// transport above.
pub fn emd(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<EmdResult, MetricsError> {
    check_sizes(a, b)?;
    if a.len() <= EXACT_EMD_LIMIT {
        Ok(EmdResult {
            value: emd_exact(a, b)?,
            approximate: false,
        })
    } else {
        Ok(EmdResult {
            value: emd_sinkhorn(a, b, &SinkhornConfig::default())?,
            approximate: true,
        })
    }
}

/// Optimal one-to-one matching cost by the Hungarian method, scaled.
pub fn emd_exact(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64, MetricsError> {
    check_sizes(a, b)?;
    let n = a.len();
    let cost = |i: usize, j: usize| squared_distance(&a[i], &b[j]).sqrt();
    let assignment = hungarian(n, cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
    Ok(total / n as f64 * EMD_SCALE)
}

/// Minimum-cost perfect matching on an `n × n` cost function; returns the
/// column assigned to each row. Shortest augmenting paths with potentials,
/// O(n³).
pub fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based arrays; column 0 is a virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    assignment
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Entropic optimal transport between uniform measures, solved in the log
/// domain with `ε` annealed geometrically; returns the transport cost of
/// the final plan, scaled.
pub fn emd_sinkhorn(
    a: &[Point3<f64>],
    b: &[Point3<f64>],
    cfg: &SinkhornConfig,
) -> Result<f64, MetricsError> {
    check_sizes(a, b)?;
    let n = a.len();
    let cost: Vec<f64> = a
        .iter()
        .flat_map(|p| b.iter().map(move |q| squared_distance(p, q).sqrt()))
        .collect();
    let c = |i: usize, j: usize| cost[i * n + j];
    let log_w = -(n as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let iterations = cfg.iterations.max(1);
    let mut eps = cfg.eps_start;
    for t in 0..iterations {
        eps = if iterations == 1 {
            cfg.eps_end
        } else {
            cfg.eps_start * (cfg.eps_end / cfg.eps_start).powf(t as f64 / (iterations - 1) as f64)
        };
        for i in 0..n {
            f[i] = eps * log_w - eps * log_sum_exp((0..n).map(|j| (g[j] - c(i, j)) / eps));
        }
        for j in 0..n {
            g[j] = eps * log_w - eps * log_sum_exp((0..n).map(|i| (f[i] - c(i, j)) / eps));
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += ((f[i] + g[j] - c(i, j)) / eps).exp() * c(i, j);
        }
    }
    Ok(total * EMD_SCALE)
}
