//! Latent-conditioned, band-limited signed distance networks with multiple
//! levels of detail: model, training, meshing and evaluation metrics.

pub mod geometry;
pub mod meshing;
pub mod metrics;
pub mod network;
pub mod training;
