//! Loss, hand-written backpropagation, Adam, auto-decoder training and
//! inference-time latent fitting.

mod adam;
mod fit;
mod grad_check;
mod loss;
mod train;

use thiserror::Error;

use crate::network::NetworkError;

pub use adam::{AdamConfig, AdamState, RowAdamState};
pub use fit::{
    fit_latent, fit_latent_masked, FitConfig, FullMask, HalfSpaceMask, SpatialMask, MIN_MASK_SHARE,
};
pub use grad_check::{grad_check, relative_error, GradCheckReport, ParamClass, GRAD_CHECK_FLOOR};
pub use loss::{backward, sdf_loss, Gradients, LossBatch, LossBreakdown, LossWeights};
pub use train::{fine_mse, train, Codebook, HistoryRow, LossHistory, TrainConfig, TrainOutput};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("loss diverged at step {step}")]
    Diverged { step: usize },
    #[error("invalid mask: {0}")]
    Mask(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}
