use ndarray::{s, Array1, Array2, Axis};

use crate::geometry::SdfSample;
use crate::network::{Conditioning, ForwardCache, NetworkError, NetworkParams};

/// Relative weights of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of far-field (coarse) samples relative to near-surface ones.
    pub lambda_c: f64,
    /// Weight of the squared latent norm.
    pub lambda_reg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_c: 1e-2,
            lambda_reg: 1e-4,
        }
    }
}

/// Samples of one shape packed for a single forward pass: fine rows first.
#[derive(Debug, Clone)]
pub struct LossBatch {
    pub points: Array2<f64>,
    pub targets: Array1<f64>,
    /// Per-row loss weight: `1/n_fine` for fine rows, `λ_c/n_coarse` for
    /// coarse rows.
    pub weights: Array1<f64>,
    pub fine_count: usize,
}

impl LossBatch {
    pub fn new<'a>(
        fine: impl ExactSizeIterator<Item = &'a SdfSample>,
        coarse: impl ExactSizeIterator<Item = &'a SdfSample>,
        lambda_c: f64,
    ) -> Self {
        let (nf, nc) = (fine.len(), coarse.len());
        let n = nf + nc;
        let mut points = Array2::zeros((n, 3));
        let mut targets = Array1::zeros(n);
        let mut weights = Array1::zeros(n);
        let wf = if nf > 0 { 1.0 / nf as f64 } else { 0.0 };
        let wc = if nc > 0 { lambda_c / nc as f64 } else { 0.0 };
        for (r, (sample, w)) in fine
            .map(|s| (s, wf))
            .chain(coarse.map(|s| (s, wc)))
            .enumerate()
        {
            points[[r, 0]] = sample.position.x;
            points[[r, 1]] = sample.position.y;
            points[[r, 2]] = sample.position.z;
            targets[r] = sample.distance;
            weights[r] = w;
        }
        Self {
            points,
            targets,
            weights,
            fine_count: nf,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Loss value and its per-head components.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean squared fine-sample error of each supervised head.
    pub fine_mse: Vec<f64>,
    pub coarse_mse: Vec<f64>,
    /// `λ_reg ||l||²`.
    pub reg: f64,
}

/// Gradient of the loss with respect to the network and the latent code.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// Absent for latent-only passes.
    pub params: Option<NetworkParams>,
    pub latent: Vec<f64>,
}

/// Loss summed over heads `levels` (mean over fine samples plus `λ_c` times
/// mean over coarse samples per head) plus the latent regularizer, with its
/// gradient. `want_params = false` skips all parameter gradients.
pub fn sdf_loss(
    params: &NetworkParams,
    latent: &[f64],
    batch: &LossBatch,
    weights: &LossWeights,
    levels: &[usize],
    want_params: bool,
) -> Result<(LossBreakdown, Gradients), NetworkError> {
    let top = levels.iter().copied().max().ok_or_else(|| {
        NetworkError::Config("at least one supervised level is required".into())
    })?;
    let cache = params.forward_train(&batch.points, latent, top)?;
    let nf = batch.fine_count;
    let nc = batch.len() - nf;
    let mut d_out = vec![Array1::<f64>::zeros(batch.len()); top];
    let mut breakdown = LossBreakdown::default();
    for &level in levels {
        let residual = &cache.outputs[level - 1] - &batch.targets;
        let sq = residual.mapv(|r| r * r);
        breakdown.total += (&sq * &batch.weights).sum();
        breakdown.fine_mse.push(if nf > 0 { sq.slice(s![..nf]).sum() / nf as f64 } else { 0.0 });
        breakdown.coarse_mse.push(if nc > 0 { sq.slice(s![nf..]).sum() / nc as f64 } else { 0.0 });
        d_out[level - 1] += &(2.0 * &residual * &batch.weights);
    }
    breakdown.reg = weights.lambda_reg * latent.iter().map(|v| v * v).sum::<f64>();
    breakdown.total += breakdown.reg;
    if !breakdown.total.is_finite() {
        return Err(NetworkError::NonFinite { layer: top });
    }
    let mut grads = backward(params, latent, &cache, &d_out, want_params);
    for (g, l) in grads.latent.iter_mut().zip(latent) {
        *g += 2.0 * weights.lambda_reg * l;
    }
    Ok((breakdown, grads))
}

/// Reverse pass through the cached forward given `d_out[i - 1] = ∂L/∂s_i`.
pub fn backward(
    params: &NetworkParams,
    latent: &[f64],
    cache: &ForwardCache,
    d_out: &[Array1<f64>],
    want_params: bool,
) -> Gradients {
    let cfg = &params.config;
    let dl = cfg.latent;
    let width = cfg.state_width();
    let cond = cfg.conditioning;
    let n = cache.inputs.nrows();
    let mut grads = want_params.then(|| params.zeros_like());
    let mut dlat = vec![0.0; dl];
    let mut dz = Array2::<f64>::zeros((n, width));

    for i in (1..=cache.top).rev() {
        let ds = &d_out[i - 1];
        let head = &params.heads[i - 1];
        let ds_sum = ds.sum();
        let w_state = head.weight.slice(s![..width]);
        for (mut row, d) in dz.axis_iter_mut(Axis(0)).zip(ds.iter()) {
            if *d != 0.0 {
                row.scaled_add(*d, &w_state);
            }
        }
        if cond == Conditioning::OutputConcat {
            for (k, g) in dlat.iter_mut().enumerate() {
                *g += ds_sum * head.weight[width + k];
            }
        }
        if let Some(g) = grads.as_mut() {
            let gh = &mut g.heads[i - 1];
            gh.weight.slice_mut(s![..width]).assign(&cache.states[i].t().dot(ds));
            if cond == Conditioning::OutputConcat {
                for (k, l) in latent.iter().enumerate() {
                    gh.weight[width + k] = ds_sum * l;
                }
            }
            gh.bias = ds_sum;
        }
        let d_h = &dz * &cache.embeddings[i];
        let d_e = &dz * &cache.pre_activations[i - 1];
        embedding_backward(params, latent, cache, i, &d_e, grads.as_mut(), &mut dlat);
        if let Some(g) = grads.as_mut() {
            g.hidden[i - 1].weight = d_h.t().dot(&cache.states[i - 1]);
            g.hidden[i - 1].bias = d_h.sum_axis(Axis(0));
        }
        dz = d_h.dot(&params.hidden[i - 1].weight);
    }
    embedding_backward(params, latent, cache, 0, &dz, grads.as_mut(), &mut dlat);
    Gradients {
        params: grads,
        latent: dlat,
    }
}

/// Gradient through the factor `e_i = [sin(ω x + φ) | l]` (or its variants)
/// given `d_e = ∂L/∂e_i`.
fn embedding_backward(
    params: &NetworkParams,
    latent: &[f64],
    cache: &ForwardCache,
    layer: usize,
    d_e: &Array2<f64>,
    grads: Option<&mut NetworkParams>,
    dlat: &mut [f64],
) {
    let cfg = &params.config;
    let dh = cfg.hidden;
    let cond = cfg.conditioning;
    if cond == Conditioning::HiddenConcat {
        for (k, g) in dlat.iter_mut().enumerate() {
            *g += d_e.column(dh + k).sum();
        }
    }
    let needs_da = grads.is_some() || cond == Conditioning::InputConcat;
    if !needs_da {
        return;
    }
    let da = &d_e.slice(s![.., ..dh]) * &cache.cosines[layer];
    let col = da.sum_axis(Axis(0));
    let freq = &params.frequencies[layer];
    if cond == Conditioning::InputConcat {
        let omega = freq.omega();
        for (k, g) in dlat.iter_mut().enumerate() {
            *g += col.dot(&omega.column(3 + k));
        }
    }
    if let Some(g) = grads {
        let gf = &mut g.frequencies[layer];
        let d_omega_xyz = da.t().dot(&cache.inputs);
        let bound = freq.bound;
        for j in 0..dh {
            for c in 0..freq.omega_raw.ncols() {
                let d_omega = if c < 3 { d_omega_xyz[[j, c]] } else { col[j] * latent[c - 3] };
                let t = freq.omega_raw[[j, c]].tanh();
                gf.omega_raw[[j, c]] = d_omega * bound * (1.0 - t * t);
            }
        }
        gf.phase.assign(&col);
    }
}
