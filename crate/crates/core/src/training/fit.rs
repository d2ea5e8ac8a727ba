use std::str::FromStr;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::loss::{sdf_loss, LossBatch, LossWeights};
use super::train::draw_subset;
use super::TrainingError;
use crate::geometry::{stream_rng, SdfSampleSet};
use crate::network::{LatentCode, NetworkParams};

/// Smallest share of samples a mask may keep.
pub const MIN_MASK_SHARE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub steps: usize,
    pub samples_per_step: usize,
    pub fine_share: Option<f64>,
    pub lambda_c: f64,
    pub lambda_reg: f64,
    pub lr: f64,
    pub lr_final: f64,
    /// Fraction of the run after which the rate decays linearly to `lr_final`.
    pub decay_start: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            samples_per_step: 10_000,
            fine_share: None,
            lambda_c: 1e-2,
            lambda_reg: 1e-4,
            lr: 1e-3,
            lr_final: 1e-5,
            decay_start: 0.9,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Constant, then linear decay over the last part of the run.
    pub fn learning_rate(&self, step: usize) -> f64 {
        let start = self.decay_start * self.steps as f64;
        let s = step as f64;
        if s <= start || self.steps as f64 <= start {
            return self.lr;
        }
        let t = (s - start) / (self.steps as f64 - start);
        self.lr + (self.lr_final - self.lr) * t
    }
}

/// A region of space supervision is restricted to.
pub trait SpatialMask: Sync {
    fn contains(&self, p: &Point3<f64>) -> bool;
}

/// Keeps everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullMask;

impl SpatialMask for FullMask {
    fn contains(&self, _: &Point3<f64>) -> bool {
        true
    }
}

/// `coordinate[axis] < offset` (or `>` when `below` is false).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpaceMask {
    pub axis: usize,
    pub offset: f64,
    pub below: bool,
}

impl SpatialMask for HalfSpaceMask {
    fn contains(&self, p: &Point3<f64>) -> bool {
        if self.below {
            p[self.axis] < self.offset
        } else {
            p[self.axis] > self.offset
        }
    }
}

impl FromStr for HalfSpaceMask {
    type Err = TrainingError;

    /// Parses `halfspace:x<0`, `halfspace:z>0.1` and similar.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TrainingError::Mask(format!("cannot parse mask `{s}`, expected e.g. halfspace:x<0"));
        let spec = s.trim().strip_prefix("halfspace:").ok_or_else(bad)?;
        let (below, pos) = match (spec.find('<'), spec.find('>')) {
            (Some(i), None) => (true, i),
            (None, Some(i)) => (false, i),
            _ => return Err(bad()),
        };
        let axis = match spec[..pos].trim() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => return Err(bad()),
        };
        let offset: f64 = spec[pos + 1..].trim().parse().map_err(|_| bad())?;
        Ok(Self { axis, offset, below })
    }
}

/// Optimizes a latent code for `samples` with the network frozen, starting
/// from zero.
pub fn fit_latent(
    params: &NetworkParams,
    samples: &SdfSampleSet,
    config: &FitConfig,
) -> Result<LatentCode, TrainingError> {
    if samples.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let mut latent = vec![0.0; params.latent_dim()];
    let mut adam = AdamState::new([latent.len()], AdamConfig::default());
    let levels: Vec<usize> = (1..params.layers()).collect();
    let weights = LossWeights {
        lambda_c: config.lambda_c,
        lambda_reg: config.lambda_reg,
    };
    for step in 0..config.steps {
        let mut rng = stream_rng(config.seed, step as u64);
        let (fine, coarse) = draw_subset(samples, config.samples_per_step, config.fine_share, &mut rng);
        let batch = LossBatch::new(fine.into_iter(), coarse.into_iter(), config.lambda_c);
        let (_, g) = sdf_loss(params, &latent, &batch, &weights, &levels, false).map_err(|e| match e {
            crate::network::NetworkError::NonFinite { .. } => TrainingError::Diverged { step },
            other => other.into(),
        })?;
        adam.update(&mut [&mut latent], &[&g.latent], config.learning_rate(step));
    }
    Ok(LatentCode(latent))
}

/// [`fit_latent`] supervised only by samples inside `mask`.
pub fn fit_latent_masked(
    params: &NetworkParams,
    samples: &SdfSampleSet,
    mask: &dyn SpatialMask,
    config: &FitConfig,
) -> Result<LatentCode, TrainingError> {
    let kept = samples.filtered(|p| mask.contains(p));
    if kept.is_empty() {
        return Err(TrainingError::Mask("mask keeps no samples".into()));
    }
    let share = kept.len() as f64 / samples.len() as f64;
    if share < MIN_MASK_SHARE {
        return Err(TrainingError::Mask(format!(
            "mask keeps {:.1}% of samples, at least {:.0}% required",
            100.0 * share,
            100.0 * MIN_MASK_SHARE
        )));
    }
    fit_latent(params, &kept, config)
}
