use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState, RowAdamState};
use super::loss::{sdf_loss, LossBatch, LossBreakdown, LossWeights};
use super::TrainingError;
use crate::geometry::{stream_rng, SdfSample, SdfSampleSet};
use crate::network::{NetworkConfig, NetworkError, NetworkParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    /// Shapes per optimization step.
    pub batch_shapes: usize,
    /// Samples drawn from each shape's set at every step.
    pub samples_per_shape: usize,
    /// Share of each per-step subset drawn from the fine samples; `None`
    /// keeps the set's own fine/coarse proportion.
    pub fine_share: Option<f64>,
    pub lambda_c: f64,
    pub lambda_reg: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Standard deviation of the initial latent codes.
    pub latent_init_std: f64,
    /// When false the frequencies keep their initial values.
    pub train_frequencies: bool,
    /// When false the phases keep their initial values.
    pub train_phases: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            batch_shapes: 4,
            samples_per_shape: 10_000,
            fine_share: None,
            lambda_c: 1e-2,
            lambda_reg: 1e-4,
            lr_start: 1e-2,
            lr_end: 1e-4,
            latent_init_std: 0.01,
            train_frequencies: true,
            train_phases: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: String| Err(TrainingError::Config(m));
        if !(self.lambda_c > 0.0 && self.lambda_c < 1.0) {
            return bad(format!("lambda_c = {} must lie in (0, 1)", self.lambda_c));
        }
        if !(self.lambda_reg >= 0.0) {
            return bad(format!("lambda_reg = {} must be non-negative", self.lambda_reg));
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return bad(format!(
                "learning rates must satisfy lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            ));
        }
        if self.batch_shapes == 0 || self.samples_per_shape == 0 {
            return bad("batch_shapes and samples_per_shape must be positive".into());
        }
        if let Some(f) = self.fine_share {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("fine_share = {f} must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Logarithmic interpolation from `lr_start` to `lr_end`.
    pub fn learning_rate(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.lr_start;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(t)
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_c: self.lambda_c,
            lambda_reg: self.lambda_reg,
        }
    }
}

/// One latent code per training shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Codebook {
    /// Rows drawn from `N(0, std²)`.
    pub fn init(rows: usize, dim: usize, std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std).expect("finite std");
        Self {
            dim,
            rows: (0..rows)
                .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn round_to_f32(&mut self) {
        for v in self.rows.iter_mut().flatten() {
            *v = *v as f32 as f64;
        }
    }
}

/// Batch-averaged loss components at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub lr: f64,
    /// Fine-sample MSE of heads `1..N-1`.
    pub fine_mse: Vec<f64>,
    /// Coarse-sample MSE of the deepest head.
    pub coarse_mse: f64,
    pub reg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    pub rows: Vec<HistoryRow>,
}

impl LossHistory {
    pub fn to_csv(&self) -> String {
        let heads = self.rows.first().map_or(0, |r| r.fine_mse.len());
        let mut out = String::from("step,lr");
        for h in 1..=heads {
            let _ = write!(out, ",fine_mse_h{h}");
        }
        out.push_str(",coarse_mse,reg\n");
        for r in &self.rows {
            let _ = write!(out, "{},{:e}", r.step, r.lr);
            for v in &r.fine_mse {
                let _ = write!(out, ",{v:e}");
            }
            let _ = writeln!(out, ",{:e},{:e}", r.coarse_mse, r.reg);
        }
        out
    }

    /// Trailing mean of the total loss over `window` steps, one value per
    /// complete window position.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        let totals: Vec<f64> = self.rows.iter().map(|r| r.total).collect();
        if window == 0 || totals.len() < window {
            return Vec::new();
        }
        totals
            .windows(window)
            .map(|w| w.iter().sum::<f64>() / window as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: NetworkParams,
    pub codebook: Codebook,
    pub history: LossHistory,
}

/// Draws the per-step subset of one shape's samples, with replacement.
pub(crate) fn draw_subset<'a>(
    set: &'a SdfSampleSet,
    count: usize,
    fine_share: Option<f64>,
    rng: &mut impl Rng,
) -> (Vec<&'a SdfSample>, Vec<&'a SdfSample>) {
    let share = match fine_share {
        _ if set.coarse.is_empty() => 1.0,
        _ if set.fine.is_empty() => 0.0,
        Some(f) => f,
        None => set.fine.len() as f64 / set.len() as f64,
    };
    let nf = (share * count as f64).round() as usize;
    let pick = |pool: &'a [SdfSample], n: usize, rng: &mut dyn rand::RngCore| -> Vec<&'a SdfSample> {
        if pool.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| &pool[rng.random_range(0..pool.len())]).collect()
    };
    let fine = pick(&set.fine, nf, rng);
    let coarse = pick(&set.coarse, count - nf, rng);
    (fine, coarse)
}

fn add_into(acc: &mut NetworkParams, g: &NetworkParams) {
    for (a, b) in acc.tensors_mut().into_iter().zip(g.tensors()) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Joint auto-decoder optimization of the network and one latent code per
/// shape. `progress` is called after every step.
pub fn train(
    dataset: &[SdfSampleSet],
    config: &TrainConfig,
    net_config: &NetworkConfig,
    mut progress: impl FnMut(&HistoryRow),
) -> Result<TrainOutput, TrainingError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    if let Some(i) = dataset.iter().position(|s| s.is_empty()) {
        return Err(TrainingError::Config(format!("shape {i} has no samples")));
    }
    let mut params = NetworkParams::init(net_config, config.seed)?;
    let mut codebook = Codebook::init(
        dataset.len(),
        net_config.latent,
        config.latent_init_std,
        config.seed ^ 0x5eed_c0de,
    );
    let mut adam = AdamState::new(
        params.tensors().iter().map(|t| t.len()),
        AdamConfig::default(),
    );
    let mut row_adam = RowAdamState::new(dataset.len(), net_config.latent, AdamConfig::default());
    let levels: Vec<usize> = (1..params.layers()).collect();
    let weights = config.weights();
    let mut order_rng = stream_rng(config.seed, 1 << 40);
    let mut order: Vec<usize> = Vec::new();
    let mut history = LossHistory::default();
    let mut grads = params.zeros_like();

    for step in 0..config.steps {
        let mut batch_shapes = Vec::with_capacity(config.batch_shapes);
        while batch_shapes.len() < config.batch_shapes {
            if order.is_empty() {
                order = (0..dataset.len()).collect();
                order.shuffle(&mut order_rng);
            }
            batch_shapes.push(order.pop().expect("refilled"));
        }
        let mut rng = stream_rng(config.seed, step as u64);
        grads.fill_zero();
        let mut latent_grads: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut summary = LossBreakdown::default();
        for &shape in &batch_shapes {
            let (fine, coarse) =
                draw_subset(&dataset[shape], config.samples_per_shape, config.fine_share, &mut rng);
            let batch = LossBatch::new(fine.into_iter(), coarse.into_iter(), config.lambda_c);
            let (loss, g) = sdf_loss(&params, codebook.row(shape), &batch, &weights, &levels, true)
                .map_err(|e| diverged(e, step))?;
            add_into(&mut grads, g.params.as_ref().expect("requested"));
            let slot = latent_grads
                .entry(shape)
                .or_insert_with(|| vec![0.0; net_config.latent]);
            for (s, v) in slot.iter_mut().zip(&g.latent) {
                *s += v;
            }
            accumulate(&mut summary, &loss);
        }
        if !config.train_frequencies || !config.train_phases {
            for f in &mut grads.frequencies {
                if !config.train_frequencies {
                    f.omega_raw.fill(0.0);
                }
                if !config.train_phases {
                    f.phase.fill(0.0);
                }
            }
        }
        let lr = config.learning_rate(step);
        {
            let g = grads.tensors();
            let mut p = params.tensors_mut();
            adam.update(&mut p, &g, lr);
        }
        for (shape, g) in &latent_grads {
            row_adam.update_row(*shape, &mut codebook.rows[*shape], g, lr);
        }
        let k = batch_shapes.len() as f64;
        let row = HistoryRow {
            step,
            lr,
            fine_mse: summary.fine_mse.iter().map(|v| v / k).collect(),
            coarse_mse: summary.coarse_mse.last().copied().unwrap_or(0.0) / k,
            reg: summary.reg / k,
            total: summary.total,
        };
        if !row.total.is_finite() || !params.all_finite() {
            return Err(TrainingError::Diverged { step });
        }
        progress(&row);
        history.rows.push(row);
    }
    Ok(TrainOutput {
        params,
        codebook,
        history,
    })
}

fn accumulate(acc: &mut LossBreakdown, loss: &LossBreakdown) {
    if acc.fine_mse.is_empty() {
        acc.fine_mse = vec![0.0; loss.fine_mse.len()];
        acc.coarse_mse = vec![0.0; loss.coarse_mse.len()];
    }
    for (a, b) in acc.fine_mse.iter_mut().zip(&loss.fine_mse) {
        *a += b;
    }
    for (a, b) in acc.coarse_mse.iter_mut().zip(&loss.coarse_mse) {
        *a += b;
    }
    acc.reg += loss.reg;
    acc.total += loss.total;
}

fn diverged(e: NetworkError, step: usize) -> TrainingError {
    match e {
        NetworkError::NonFinite { .. } => TrainingError::Diverged { step },
        other => TrainingError::Network(other),
    }
}

/// Mean squared error of head `level` over every fine sample of `set`.
pub fn fine_mse(
    params: &NetworkParams,
    latent: &[f64],
    set: &SdfSampleSet,
    level: usize,
) -> Result<f64, NetworkError> {
    if set.fine.is_empty() {
        return Ok(0.0);
    }
    let points: Vec<_> = set.fine.iter().map(|s| s.position).collect();
    let pred = params.forward_batch(&points, latent, level)?;
    let sum: f64 = pred
        .iter()
        .zip(&set.fine)
        .map(|(p, s)| (p - s.distance).powi(2))
        .sum();
    Ok(sum / set.fine.len() as f64)
}
