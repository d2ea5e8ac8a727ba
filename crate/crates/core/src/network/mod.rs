//! Conditional band-limited coordinate network with one output head per
//! level of detail.

mod collapse;
mod config;
mod forward;
mod params;
mod trig;

use thiserror::Error;

pub use collapse::{collapse_latent, UnconditionalParams};
pub use config::{BandwidthSchedule, Conditioning, LayerBounds, NetworkConfig};
pub use forward::{points_to_matrix, ForwardCache, ForwardOutputs, OpCount};
pub use params::{FrequencyLayer, HiddenLayer, LatentCode, NetworkParams, OutputHead, ATANH_CLAMP};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("{what} has dimension {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("level {level} out of range 1..={max}")]
    Level { level: usize, max: usize },
    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },
}
