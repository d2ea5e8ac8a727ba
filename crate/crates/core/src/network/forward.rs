use nalgebra::Point3;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::trig::sin_cos_in_place;
use super::{Conditioning, NetworkError, NetworkParams};

/// Points per block in batched evaluation.
const CHUNK: usize = 1024;

/// Per-head SDF values and the hidden states that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutputs {
    /// `sdf[i - 1]` is the output of head `i`.
    pub sdf: Vec<f64>,
    /// `activations[i]` is `z_i`, for `i = 0..N-1`.
    pub activations: Vec<Vec<f64>>,
}

/// Multiply-add count of a batched evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub multiply_adds: u64,
    pub layers_evaluated: usize,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Array2<f64>,
    /// Deepest layer evaluated.
    pub top: usize,
    /// `embeddings[i]`: the factor multiplied into `z_i` (`[g_i | l]` for
    /// hidden conditioning, `g_i` otherwise), `n × width`.
    pub embeddings: Vec<Array2<f64>>,
    /// `cos(ω_i x + φ_i)`, `n × d_h`.
    pub cosines: Vec<Array2<f64>>,
    /// `pre_activations[i - 1] = W_i z_{i-1} + b_i`.
    pub pre_activations: Vec<Array2<f64>>,
    pub states: Vec<Array2<f64>>,
    /// `outputs[i - 1]`: head `i` value per point.
    pub outputs: Vec<Array1<f64>>,
}

/// Effective frequencies and phase offsets, computed once per call.
pub(crate) struct Embeddings {
    pub omega: Vec<Array2<f64>>,
    /// Phase plus any latent contribution (input conditioning).
    pub offset: Vec<Array1<f64>>,
}

impl NetworkParams {
    pub(crate) fn prepare_embeddings(&self, latent: &[f64], top: usize) -> Embeddings {
        let mut omega = Vec::with_capacity(top + 1);
        let mut offset = Vec::with_capacity(top + 1);
        for layer in &self.frequencies[..=top] {
            let w = layer.omega();
            let mut off = layer.phase.clone();
            if self.config.conditioning == Conditioning::InputConcat {
                for (j, o) in off.iter_mut().enumerate() {
                    for (k, l) in latent.iter().enumerate() {
                        *o += w[[j, 3 + k]] * l;
                    }
                }
            }
            omega.push(w);
            offset.push(off);
        }
        Embeddings { omega, offset }
    }

    /// Writes `[sin(ω x + φ) | l]` (latent columns only for hidden
    /// conditioning) into a fresh `n × width` block, and optionally the
    /// cosines.
    fn embedding_block(
        &self,
        emb: &Embeddings,
        layer: usize,
        xs: ArrayView2<f64>,
        latent: &[f64],
        want_cos: bool,
    ) -> (Array2<f64>, Option<Array2<f64>>) {
        let n = xs.nrows();
        let dh = self.config.hidden;
        let width = self.config.state_width();
        let omega = &emb.omega[layer];
        let offset = emb.offset[layer].as_slice().expect("standard layout");
        let (wx, wy, wz): (Vec<f64>, Vec<f64>, Vec<f64>) = (
            omega.column(0).to_vec(),
            omega.column(1).to_vec(),
            omega.column(2).to_vec(),
        );
        let mut block = Array2::<f64>::zeros((n, width));
        let mut cos = want_cos.then(|| Array2::<f64>::zeros((n, dh)));
        let hidden_concat = self.config.conditioning == Conditioning::HiddenConcat;
        let out = block.as_slice_mut().expect("standard layout");
        for (r, row) in out.chunks_exact_mut(width).enumerate() {
            let (x, y, z) = (xs[[r, 0]], xs[[r, 1]], xs[[r, 2]]);
            let sines = &mut row[..dh];
            let (offset, wx, wy, wz) = (&offset[..dh], &wx[..dh], &wy[..dh], &wz[..dh]);
            for j in 0..dh {
                sines[j] = offset[j] + wx[j] * x + wy[j] * y + wz[j] * z;
            }
            match cos.as_mut() {
                Some(c) => {
                    let mut crow = c.row_mut(r);
                    sin_cos_in_place(sines, Some(crow.as_slice_mut().expect("standard layout")));
                }
                None => sin_cos_in_place(sines, None),
            }
            if hidden_concat {
                row[dh..].copy_from_slice(latent);
            }
        }
        (block, cos)
    }

    fn head_value(&self, level: usize, z: &[f64], latent: &[f64]) -> f64 {
        let head = &self.heads[level - 1];
        let w = head.weight.as_slice().expect("standard layout");
        let mut s = head.bias;
        for (wi, zi) in w.iter().zip(z) {
            s += wi * zi;
        }
        if self.config.conditioning == Conditioning::OutputConcat {
            for (wi, li) in w[z.len()..].iter().zip(latent) {
                s += wi * li;
            }
        }
        s
    }

    fn head_block(&self, level: usize, z: &Array2<f64>, latent: &[f64]) -> Array1<f64> {
        let head = &self.heads[level - 1];
        let width = z.ncols();
        let mut bias = head.bias;
        if self.config.conditioning == Conditioning::OutputConcat {
            bias += head.weight.slice(s![width..]).dot(&Array1::from(latent.to_vec()));
        }
        let mut out = z.dot(&head.weight.slice(s![..width]));
        out += bias;
        out
    }

    /// Point-wise reference evaluation of every head.
    pub fn forward_all(&self, x: &Point3<f64>, latent: &[f64]) -> Result<ForwardOutputs, NetworkError> {
        self.check_latent(latent)?;
        let dh = self.config.hidden;
        let mut input = vec![x.x, x.y, x.z];
        if self.config.conditioning == Conditioning::InputConcat {
            input.extend_from_slice(latent);
        }
        let embed = |i: usize| -> Vec<f64> {
            let mut e = self.frequencies[i].embed(&input).to_vec();
            if self.config.conditioning == Conditioning::HiddenConcat {
                e.extend_from_slice(latent);
            }
            e
        };
        debug_assert!(dh > 0);
        let mut z = embed(0);
        let mut activations = vec![z.clone()];
        let mut sdf = Vec::with_capacity(self.layers() - 1);
        for i in 1..self.layers() {
            let layer = &self.hidden[i - 1];
            let e = embed(i);
            let next: Vec<f64> = (0..z.len())
                .map(|r| {
                    let mut h = layer.bias[r];
                    for (c, zc) in z.iter().enumerate() {
                        h += layer.weight[[r, c]] * zc;
                    }
                    e[r] * h
                })
                .collect();
            z = next;
            sdf.push(self.head_value(i, &z, latent));
            activations.push(z.clone());
        }
        Ok(ForwardOutputs { sdf, activations })
    }

    /// Head `level` evaluated for every point; layers deeper than `level`
    /// are never touched.
    pub fn forward_batch(
        &self,
        xs: &[Point3<f64>],
        latent: &[f64],
        level: usize,
    ) -> Result<Vec<f64>, NetworkError> {
        self.forward_batch_counted(xs, latent, level).map(|(v, _)| v)
    }

    pub fn forward_batch_counted(
        &self,
        xs: &[Point3<f64>],
        latent: &[f64],
        level: usize,
    ) -> Result<(Vec<f64>, OpCount), NetworkError> {
        self.check_latent(latent)?;
        self.check_level(level)?;
        let emb = self.prepare_embeddings(latent, level);
        let mut ops = OpCount {
            multiply_adds: 0,
            layers_evaluated: level + 1,
        };
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(CHUNK) {
            let block = Array2::from_shape_fn((chunk.len(), 3), |(r, c)| chunk[r][c]);
            let values = self.forward_block(&emb, block.view(), latent, level, &mut ops);
            out.extend(values.iter());
        }
        Ok((out, ops))
    }

    fn forward_block(
        &self,
        emb: &Embeddings,
        xs: ArrayView2<f64>,
        latent: &[f64],
        level: usize,
        ops: &mut OpCount,
    ) -> Array1<f64> {
        let n = xs.nrows() as u64;
        let width = self.config.state_width() as u64;
        let per_embedding = n * self.config.hidden as u64 * 3;
        let (mut z, _) = self.embedding_block(emb, 0, xs, latent, false);
        ops.multiply_adds += per_embedding;
        for i in 1..=level {
            let layer = &self.hidden[i - 1];
            let mut h = z.dot(&layer.weight.t());
            h += &layer.bias;
            let (e, _) = self.embedding_block(emb, i, xs, latent, false);
            h *= &e;
            z = h;
            ops.multiply_adds += per_embedding + n * width * width + n * width;
        }
        ops.multiply_adds += n * self.config.head_width() as u64;
        self.head_block(level, &z, latent)
    }

    /// Forward pass through layer `top` keeping every intermediate needed
    /// for backpropagation. Fails on the first non-finite layer.
    pub fn forward_train(
        &self,
        xs: &Array2<f64>,
        latent: &[f64],
        top: usize,
    ) -> Result<ForwardCache, NetworkError> {
        self.check_latent(latent)?;
        self.check_level(top)?;
        let emb = self.prepare_embeddings(latent, top);
        let finite = |a: &Array2<f64>| a.iter().all(|v| v.is_finite());
        let mut embeddings = Vec::with_capacity(top + 1);
        let mut cosines = Vec::with_capacity(top + 1);
        let mut pre_activations = Vec::with_capacity(top);
        let mut states = Vec::with_capacity(top + 1);
        let mut outputs = Vec::with_capacity(top);

        let (e0, c0) = self.embedding_block(&emb, 0, xs.view(), latent, true);
        if !finite(&e0) {
            return Err(NetworkError::NonFinite { layer: 0 });
        }
        states.push(e0.clone());
        embeddings.push(e0);
        cosines.push(c0.expect("requested"));
        for i in 1..=top {
            let layer = &self.hidden[i - 1];
            let mut h = states[i - 1].dot(&layer.weight.t());
            h += &layer.bias;
            let (e, c) = self.embedding_block(&emb, i, xs.view(), latent, true);
            let z = &h * &e;
            if !finite(&z) {
                return Err(NetworkError::NonFinite { layer: i });
            }
            let s = self.head_block(i, &z, latent);
            if !s.iter().all(|v| v.is_finite()) {
                return Err(NetworkError::NonFinite { layer: i });
            }
            outputs.push(s);
            pre_activations.push(h);
            embeddings.push(e);
            cosines.push(c.expect("requested"));
            states.push(z);
        }
        Ok(ForwardCache {
            inputs: xs.clone(),
            top,
            embeddings,
            cosines,
            pre_activations,
            states,
            outputs,
        })
    }
}

/// Packs points into an `n × 3` matrix.
pub fn points_to_matrix(points: &[Point3<f64>]) -> Array2<f64> {
    let mut m = Array2::zeros((points.len(), 3));
    for (mut row, p) in m.axis_iter_mut(Axis(0)).zip(points) {
        row[0] = p.x;
        row[1] = p.y;
        row[2] = p.z;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LatentCode, NetworkConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny(conditioning: Conditioning) -> NetworkParams {
        let cfg = NetworkConfig {
            layers: 4,
            hidden: 6,
            latent: 3,
            max_bandwidth: 12.0,
            conditioning,
            ..NetworkConfig::desk()
        };
        NetworkParams::init(&cfg, 42).unwrap()
    }

    #[test]
    fn zero_head_weights_give_bias() {
        let mut p = tiny(Conditioning::HiddenConcat);
        for h in &mut p.heads {
            h.weight.fill(0.0);
            h.bias = 0.25;
        }
        let out = p.forward_all(&Point3::new(0.1, -0.3, 0.2), &[0.5, -1.0, 2.0]).unwrap();
        assert!(out.sdf.iter().all(|s| *s == 0.25));
    }

    #[test]
    fn batch_of_one_matches_pointwise() {
        for c in [Conditioning::InputConcat, Conditioning::OutputConcat, Conditioning::HiddenConcat] {
            let p = tiny(c);
            let x = Point3::new(0.2, 0.1, -0.4);
            let l = [0.3, -0.2, 0.05];
            let all = p.forward_all(&x, &l).unwrap();
            for level in 1..4 {
                let b = p.forward_batch(&[x], &l, level).unwrap();
                assert!((b[0] - all.sdf[level - 1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn train_forward_matches_pointwise() {
        let p = tiny(Conditioning::HiddenConcat);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point3<f64>> = (0..20)
            .map(|_| Point3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .collect();
        let l = LatentCode(vec![0.1, 0.2, -0.3]);
        let cache = p.forward_train(&points_to_matrix(&pts), &l, 3).unwrap();
        for (r, x) in pts.iter().enumerate() {
            let all = p.forward_all(x, &l).unwrap();
            for level in 1..=3 {
                assert!((cache.outputs[level - 1][r] - all.sdf[level - 1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_levels_and_dims_rejected() {
        let p = tiny(Conditioning::HiddenConcat);
        let x = [Point3::origin()];
        assert!(matches!(p.forward_batch(&x, &[0.0; 3], 0), Err(NetworkError::Level { .. })));
        assert!(matches!(p.forward_batch(&x, &[0.0; 3], 4), Err(NetworkError::Level { .. })));
        assert!(matches!(p.forward_batch(&x, &[0.0; 2], 1), Err(NetworkError::Dimension { .. })));
        assert!(p.forward_all(&x[0], &[0.0; 4]).is_err());
    }

    #[test]
    fn truncation_skips_deeper_layers() {
        let p = tiny(Conditioning::HiddenConcat);
        let xs = vec![Point3::new(0.1, 0.2, 0.3); 10];
        let l = [0.0; 3];
        let (_, ops1) = p.forward_batch_counted(&xs, &l, 1).unwrap();
        let (_, ops3) = p.forward_batch_counted(&xs, &l, 3).unwrap();
        // level i: i + 1 embeddings, i hidden layers (+ Hadamard), one head
        let per_layer = 10 * (6 * 3 + 9 * 9 + 9);
        assert_eq!(ops1.multiply_adds, 10 * 6 * 3 + per_layer + 10 * 9);
        assert_eq!(ops3.multiply_adds, 10 * 6 * 3 + 3 * per_layer + 10 * 9);
        assert_eq!(ops1.layers_evaluated, 2);
    }

    #[test]
    fn nan_parameter_reports_layer() {
        let mut p = tiny(Conditioning::HiddenConcat);
        p.hidden[1].bias[0] = f64::NAN;
        let xs = points_to_matrix(&[Point3::new(0.1, 0.1, 0.1)]);
        match p.forward_train(&xs, &[0.0; 3], 3) {
            Err(NetworkError::NonFinite { layer }) => assert_eq!(layer, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
