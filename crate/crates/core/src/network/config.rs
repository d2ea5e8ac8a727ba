use serde::{Deserialize, Serialize};

use super::NetworkError;

/// Where the latent code enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Latent concatenated to the coordinates inside every sine embedding.
    InputConcat,
    /// Latent concatenated to the hidden state right before each output head.
    OutputConcat,
    /// Latent concatenated to every sine embedding, widening the hidden state.
    #[default]
    HiddenConcat,
}

impl Conditioning {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::InputConcat => "input_concat",
            Self::OutputConcat => "output_concat",
            Self::HiddenConcat => "hidden_concat",
        }
    }
}

/// Cumulative bandwidth profile in 48ths of the total, one entry per layer
/// of the 13-layer reference network.
const PROGRESSIVE_PROFILE: [f64; 13] = [
    1.0, 3.0, 5.0, 7.0, 9.0, 12.0, 15.0, 18.0, 24.0, 30.0, 36.0, 42.0, 48.0,
];

/// How the total bandwidth is split across frequency layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSchedule {
    /// B/48, 4×B/24, 3×B/16, 5×B/8 for 13 layers; other depths resample the
    /// same cumulative profile linearly.
    #[default]
    Progressive,
    /// Per-layer bounds given explicitly; must sum to the total bandwidth.
    Explicit(Vec<f64>),
}

/// Per-layer frequency bounds `B_0..B_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds(Vec<f64>);

impl LayerBounds {
    pub fn new(bounds: Vec<f64>, total: f64) -> Result<Self, NetworkError> {
        if let Some(b) = bounds.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(NetworkError::Config(format!("layer bound {b} is not positive")));
        }
        let sum: f64 = bounds.iter().sum();
        if (sum - total).abs() > 1e-9 * total.abs().max(1.0) {
            return Err(NetworkError::Config(format!(
                "layer bounds sum to {sum}, expected total bandwidth {total}"
            )));
        }
        Ok(Self(bounds))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sum of bounds of layers `0..=level`: the spectral support of head `level`.
    pub fn cumulative(&self, level: usize) -> f64 {
        self.0[..=level].iter().sum()
    }
}

/// Architecture of the conditional band-limited network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Number of frequency layers N; the network has N-1 output heads.
    pub layers: usize,
    /// Sine embedding width d_h.
    pub hidden: usize,
    /// Latent code size d_l.
    pub latent: usize,
    /// Total bandwidth B (angular frequency over the unit cube).
    pub max_bandwidth: f64,
    #[serde(default)]
    pub schedule: BandwidthSchedule,
    #[serde(default)]
    pub conditioning: Conditioning,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl NetworkConfig {
    /// Reference-scale architecture: 13 layers, width 256 + 256, B = 256.
    pub fn reference() -> Self {
        Self {
            layers: 13,
            hidden: 256,
            latent: 256,
            max_bandwidth: 256.0,
            schedule: BandwidthSchedule::Progressive,
            conditioning: Conditioning::HiddenConcat,
        }
    }

    /// Desk-scale default used throughout the tests.
    pub fn desk() -> Self {
        Self {
            layers: 7,
            hidden: 64,
            latent: 32,
            max_bandwidth: 64.0,
            schedule: BandwidthSchedule::Progressive,
            conditioning: Conditioning::HiddenConcat,
        }
    }

    pub fn heads(&self) -> usize {
        self.layers - 1
    }

    /// Width of the hidden state z_i.
    pub fn state_width(&self) -> usize {
        match self.conditioning {
            Conditioning::HiddenConcat => self.hidden + self.latent,
            Conditioning::InputConcat | Conditioning::OutputConcat => self.hidden,
        }
    }

    /// Columns of each frequency matrix.
    pub fn embedding_inputs(&self) -> usize {
        match self.conditioning {
            Conditioning::InputConcat => 3 + self.latent,
            _ => 3,
        }
    }

    /// Inputs to each output head.
    pub fn head_width(&self) -> usize {
        match self.conditioning {
            Conditioning::OutputConcat => self.hidden + self.latent,
            _ => self.state_width(),
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.layers < 2 {
            return Err(NetworkError::Config(format!(
                "need at least 2 layers, got {}",
                self.layers
            )));
        }
        if self.hidden == 0 {
            return Err(NetworkError::Config("hidden width must be positive".into()));
        }
        if !(self.max_bandwidth.is_finite() && self.max_bandwidth > 0.0) {
            return Err(NetworkError::Config("total bandwidth must be positive".into()));
        }
        Ok(())
    }

    pub fn layer_bounds(&self) -> Result<LayerBounds, NetworkError> {
        self.validate()?;
        let n = self.layers;
        let bounds = match &self.schedule {
            BandwidthSchedule::Progressive => {
                let last = (PROGRESSIVE_PROFILE.len() - 1) as f64;
                let cumulative = |k: usize| -> f64 {
                    let t = k as f64 * last / (n - 1) as f64;
                    let lo = t.floor() as usize;
                    let hi = (lo + 1).min(PROGRESSIVE_PROFILE.len() - 1);
                    let frac = t - lo as f64;
                    let c = PROGRESSIVE_PROFILE[lo] * (1.0 - frac) + PROGRESSIVE_PROFILE[hi] * frac;
                    c / 48.0 * self.max_bandwidth
                };
                let mut out = Vec::with_capacity(n);
                let mut prev = 0.0;
                for k in 0..n {
                    // last layer absorbs rounding so the sum is exact
                    let c = if k == n - 1 { self.max_bandwidth } else { cumulative(k) };
                    out.push(c - prev);
                    prev = c;
                }
                out
            }
            BandwidthSchedule::Explicit(b) => {
                if b.len() != n {
                    return Err(NetworkError::Config(format!(
                        "explicit schedule has {} bounds for {} layers",
                        b.len(),
                        n
                    )));
                }
                b.clone()
            }
        };
        LayerBounds::new(bounds, self.max_bandwidth)
    }
}
