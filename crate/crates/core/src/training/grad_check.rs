use super::loss::{sdf_loss, LossBatch, LossWeights};
use crate::network::{NetworkError, NetworkParams};

/// Magnitude below which gradients are compared absolutely rather than
/// relatively.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamClass {
    Frequency,
    Phase,
    Weight,
    Bias,
    HeadWeight,
    HeadBias,
    Latent,
}

impl ParamClass {
    pub const ALL: [ParamClass; 7] = [
        Self::Frequency,
        Self::Phase,
        Self::Weight,
        Self::Bias,
        Self::HeadWeight,
        Self::HeadBias,
        Self::Latent,
    ];
}

/// Worst discrepancy between analytic and finite-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error per parameter class, in [`ParamClass::ALL`] order.
    pub per_class: Vec<(ParamClass, f64)>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.per_class.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_CHECK_FLOOR)
}

fn tensor_class(params: &NetworkParams, index: usize) -> ParamClass {
    let n_freq = 2 * params.frequencies.len();
    let n_hidden = 2 * params.hidden.len();
    match index {
        i if i < n_freq && i % 2 == 0 => ParamClass::Frequency,
        i if i < n_freq => ParamClass::Phase,
        i if i < n_freq + n_hidden && i % 2 == 0 => ParamClass::Weight,
        i if i < n_freq + n_hidden => ParamClass::Bias,
        i if i % 2 == 0 => ParamClass::HeadWeight,
        _ => ParamClass::HeadBias,
    }
}

/// Central finite differences with step `h` over every parameter and
/// latent entry, compared with the backward pass.
pub fn grad_check(
    params: &NetworkParams,
    latent: &[f64],
    batch: &LossBatch,
    weights: &LossWeights,
    levels: &[usize],
    h: f64,
) -> Result<GradCheckReport, NetworkError> {
    let (_, grads) = sdf_loss(params, latent, batch, weights, levels, true)?;
    let analytic = grads.params.expect("requested");
    let loss_at = |p: &NetworkParams, l: &[f64]| -> Result<f64, NetworkError> {
        Ok(sdf_loss(p, l, batch, weights, levels, false)?.0.total)
    };
    let mut worst = [0.0f64; 7];
    let mut record = |class: ParamClass, err: f64| {
        let k = ParamClass::ALL.iter().position(|c| *c == class).expect("listed");
        worst[k] = worst[k].max(err);
    };

    let mut probe = params.clone();
    let analytic_tensors: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    for (t, g) in analytic_tensors.iter().enumerate() {
        let class = tensor_class(params, t);
        for (e, &ga) in g.iter().enumerate() {
            let orig = probe.tensors()[t][e];
            probe.tensors_mut()[t][e] = orig + h;
            let up = loss_at(&probe, latent)?;
            probe.tensors_mut()[t][e] = orig - h;
            let down = loss_at(&probe, latent)?;
            probe.tensors_mut()[t][e] = orig;
            record(class, relative_error(ga, (up - down) / (2.0 * h)));
        }
    }
    let mut l = latent.to_vec();
    for k in 0..l.len() {
        let orig = l[k];
        l[k] = orig + h;
        let up = loss_at(params, &l)?;
        l[k] = orig - h;
        let down = loss_at(params, &l)?;
        l[k] = orig;
        record(ParamClass::Latent, relative_error(grads.latent[k], (up - down) / (2.0 * h)));
    }
    Ok(GradCheckReport {
        per_class: ParamClass::ALL.iter().copied().zip(worst).collect(),
    })
}
