use std::f64::consts::PI;
use std::ops::Deref;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Conditioning, LayerBounds, NetworkConfig, NetworkError};

/// Largest |tanh| used when inverting the frequency reparameterization.
pub const ATANH_CLAMP: f64 = 1.0 - 1e-6;

/// Sine embedding `sin(tanh(ω̄)·B x + φ)` with a hard frequency bound `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyLayer {
    /// Unconstrained frequency parameters ω̄, `d_h × inputs`.
    pub omega_raw: Array2<f64>,
    pub phase: Array1<f64>,
    pub bound: f64,
}

impl FrequencyLayer {
    /// Effective frequencies `tanh(ω̄)·B`, each strictly inside `(-B, B)`.
    pub fn omega(&self) -> Array2<f64> {
        self.omega_raw.mapv(|w| w.tanh() * self.bound)
    }

    /// `sin(ω x + φ)` for an input vector `x` (coordinates, possibly with a
    /// latent appended).
    pub fn embed(&self, x: &[f64]) -> Array1<f64> {
        let omega = self.omega();
        Array1::from_shape_fn(self.phase.len(), |r| {
            let mut a = self.phase[r];
            for (c, xc) in x.iter().enumerate() {
                a += omega[[r, c]] * xc;
            }
            a.sin()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    pub weight: Array1<f64>,
    pub bias: f64,
}

/// All learnable tensors of the conditional network.
///
/// `hidden[i - 1]` and `heads[i - 1]` belong to layer `i` (1 ≤ i < N).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    pub frequencies: Vec<FrequencyLayer>,
    pub hidden: Vec<HiddenLayer>,
    pub heads: Vec<OutputHead>,
}

/// A latent code `l ∈ R^{d_l}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// `(1 - t)·a + t·b`.
    pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Self {
        Self(a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect())
    }
}

impl Deref for LatentCode {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for LatentCode {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, limit: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, limit: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.random_range(-limit..=limit))
}

impl NetworkParams {
    /// Random initialization: effective frequencies uniform in `[-B_i, B_i]`,
    /// phases uniform in `[-π, π]`, linear layers uniform in `±1/√fan_in`.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self, NetworkError> {
        let bounds = config.layer_bounds()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dh, inputs) = (config.hidden, config.embedding_inputs());
        let frequencies = bounds
            .as_slice()
            .iter()
            .map(|&bound| {
                let omega_raw = Array2::from_shape_simple_fn((dh, inputs), || {
                    let u: f64 = rng.random_range(-bound..=bound);
                    (u / bound).clamp(-ATANH_CLAMP, ATANH_CLAMP).atanh()
                });
                let phase = Array1::from_shape_simple_fn(dh, || rng.random_range(-PI..=PI));
                FrequencyLayer {
                    omega_raw,
                    phase,
                    bound,
                }
            })
            .collect();
        let width = config.state_width();
        let limit = 1.0 / (width as f64).sqrt();
        let hidden = (1..config.layers)
            .map(|_| HiddenLayer {
                weight: uniform_matrix(&mut rng, width, width, limit),
                bias: uniform_vector(&mut rng, width, limit),
            })
            .collect();
        let head_width = config.head_width();
        let head_limit = 1.0 / (head_width as f64).sqrt();
        let heads = (1..config.layers)
            .map(|_| OutputHead {
                weight: uniform_vector(&mut rng, head_width, head_limit),
                bias: rng.random_range(-head_limit..=head_limit),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            frequencies,
            hidden,
            heads,
        })
    }

    /// Same shapes, every entry zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.fill_zero();
        out
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn bounds(&self) -> LayerBounds {
        LayerBounds::new(
            self.frequencies.iter().map(|f| f.bound).collect(),
            self.frequencies.iter().map(|f| f.bound).sum(),
        )
        .expect("bounds validated at construction")
    }

    pub fn layers(&self) -> usize {
        self.frequencies.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent
    }

    pub fn conditioning(&self) -> Conditioning {
        self.config.conditioning
    }

    /// Names and shapes of every tensor in storage order: frequency layers,
    /// hidden layers, then heads.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut specs = Vec::new();
        for (i, f) in self.frequencies.iter().enumerate() {
            specs.push((format!("freq{i}.omega_raw"), f.omega_raw.shape().to_vec()));
            specs.push((format!("freq{i}.phase"), vec![f.phase.len()]));
        }
        for (k, h) in self.hidden.iter().enumerate() {
            specs.push((format!("hidden{}.weight", k + 1), h.weight.shape().to_vec()));
            specs.push((format!("hidden{}.bias", k + 1), vec![h.bias.len()]));
        }
        for (k, h) in self.heads.iter().enumerate() {
            specs.push((format!("head{}.weight", k + 1), vec![h.weight.len()]));
            specs.push((format!("head{}.bias", k + 1), vec![1]));
        }
        specs
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for f in &self.frequencies {
            out.push(f.omega_raw.as_slice().expect("standard layout"));
            out.push(f.phase.as_slice().expect("standard layout"));
        }
        for h in &self.hidden {
            out.push(h.weight.as_slice().expect("standard layout"));
            out.push(h.bias.as_slice().expect("standard layout"));
        }
        for h in &self.heads {
            out.push(h.weight.as_slice().expect("standard layout"));
            out.push(std::slice::from_ref(&h.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for f in &mut self.frequencies {
            out.push(f.omega_raw.as_slice_mut().expect("standard layout"));
            out.push(f.phase.as_slice_mut().expect("standard layout"));
        }
        for h in &mut self.hidden {
            out.push(h.weight.as_slice_mut().expect("standard layout"));
            out.push(h.bias.as_slice_mut().expect("standard layout"));
        }
        for h in &mut self.heads {
            out.push(h.weight.as_slice_mut().expect("standard layout"));
            out.push(std::slice::from_mut(&mut h.bias));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Rounds every tensor to the nearest `f32`, as stored in checkpoints.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Largest `|ω| / B` over every frequency coefficient; always < 1.
    pub fn max_frequency_ratio(&self) -> f64 {
        self.frequencies
            .iter()
            .flat_map(|f| f.omega().iter().map(|w| (w / f.bound).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_latent(&self, latent: &[f64]) -> Result<(), NetworkError> {
        if latent.len() != self.config.latent {
            return Err(NetworkError::Dimension {
                what: "latent code",
                expected: self.config.latent,
                got: latent.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<(), NetworkError> {
        if level < 1 || level >= self.layers() {
            return Err(NetworkError::Level {
                level,
                max: self.layers() - 1,
            });
        }
        Ok(())
    }
}
