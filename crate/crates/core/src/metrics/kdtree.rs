use nalgebra::Point3;

/// Static 3-d tree for exact nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3<f64>>,
    /// Permutation of point indices; each subrange stores its splitting
    /// point at the midpoint.
    order: Vec<usize>,
    axes: Vec<u8>,
}

const LEAF: usize = 8;

/// Squared Euclidean distance; every metric uses this exact expression.
#[inline]
pub fn squared_distance(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (a - b).norm_squared()
}

impl KdTree {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            axes: vec![0; points.len()],
        };
        tree.build(0, points.len());
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF {
            return;
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for &i in &self.order[lo..hi] {
            for d in 0..3 {
                min[d] = min[d].min(self.points[i][d]);
                max[d] = max[d].max(self.points[i][d]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])))
            .expect("three axes");
        let mid = (lo + hi) / 2;
        let points = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        self.axes[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    /// Index and squared distance of the point nearest to `q`. Ties go to
    /// the smallest index.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.points.len(), &mut best);
        Some(best)
    }

    fn consider(&self, q: &Point3<f64>, i: usize, best: &mut (usize, f64)) {
        let d = squared_distance(q, &self.points[i]);
        if d < best.1 || (d == best.1 && i < best.0) {
            *best = (i, d);
        }
    }

    fn search(&self, q: &Point3<f64>, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if hi - lo <= LEAF {
            for &i in &self.order[lo..hi] {
                self.consider(q, i, best);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let split = self.order[mid];
        let axis = self.axes[mid] as usize;
        self.consider(q, split, best);
        let delta = q[axis] - self.points[split][axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        if delta * delta <= best.1 {
            self.search(q, far.0, far.1, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pt = || Point3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let data: Vec<_> = (0..700).map(|_| pt()).collect();
        let tree = KdTree::new(&data);
        for _ in 0..300 {
            let q = pt();
            let (_, d) = tree.nearest(&q).unwrap();
            let brute = data.iter().map(|p| squared_distance(&q, p)).fold(f64::INFINITY, f64::min);
            assert_eq!(d, brute);
        }
    }

    #[test]
    fn empty_tree() {
        assert!(KdTree::new(&[]).nearest(&Point3::origin()).is_none());
    }
}
