//! Folding a fixed latent code into the weights, producing an
//! unconditional network of width `d_h + d_l` with identical outputs.

use nalgebra::Point3;
use ndarray::{s, Array1, Array2};

use super::{Conditioning, NetworkError, NetworkParams};

/// A latent-free network whose embeddings are `sin(ω x + φ)` with
/// `ω: width × 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconditionalParams {
    pub omega: Vec<Array2<f64>>,
    pub phase: Vec<Array1<f64>>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub head_weights: Vec<Array1<f64>>,
    pub head_biases: Vec<f64>,
}

/// Builds the unconditional network equivalent to `params` at `latent`.
///
/// With `α = max|l|`, the latent appears as extra embedding rows of zero
/// frequency and phase `arcsin(l/α)`, which emit the constant `l/α`; the
/// latent columns of every linear map are scaled by `α` to compensate.
pub fn collapse_latent(
    params: &NetworkParams,
    latent: &[f64],
) -> Result<UnconditionalParams, NetworkError> {
    if params.conditioning() != Conditioning::HiddenConcat {
        return Err(NetworkError::Config(format!(
            "latent collapse needs hidden conditioning, network uses {}",
            params.conditioning().as_str()
        )));
    }
    params.check_latent(latent)?;
    let dh = params.config.hidden;
    let dl = params.config.latent;
    let alpha = latent.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let folded_phase: Vec<f64> = latent
        .iter()
        .map(|l| if alpha == 0.0 { 0.0 } else { (l / alpha).clamp(-1.0, 1.0).asin() })
        .collect();

    let mut omega = Vec::with_capacity(params.layers());
    let mut phase = Vec::with_capacity(params.layers());
    for f in &params.frequencies {
        let mut w = Array2::zeros((dh + dl, 3));
        w.slice_mut(s![..dh, ..]).assign(&f.omega());
        let mut p = Array1::zeros(dh + dl);
        p.slice_mut(s![..dh]).assign(&f.phase);
        p.slice_mut(s![dh..]).assign(&Array1::from(folded_phase.clone()));
        omega.push(w);
        phase.push(p);
    }
    let weights = params
        .hidden
        .iter()
        .map(|h| {
            let mut w = h.weight.clone();
            w.slice_mut(s![.., dh..]).mapv_inplace(|v| v * alpha);
            w
        })
        .collect();
    let biases = params.hidden.iter().map(|h| h.bias.clone()).collect();
    let head_weights = params
        .heads
        .iter()
        .map(|h| {
            let mut w = h.weight.clone();
            w.slice_mut(s![dh..]).mapv_inplace(|v| v * alpha);
            w
        })
        .collect();
    let head_biases = params.heads.iter().map(|h| h.bias).collect();
    Ok(UnconditionalParams {
        omega,
        phase,
        weights,
        biases,
        head_weights,
        head_biases,
    })
}

impl UnconditionalParams {
    pub fn layers(&self) -> usize {
        self.omega.len()
    }

    fn embed(&self, layer: usize, x: &Point3<f64>) -> Array1<f64> {
        let w = &self.omega[layer];
        let p = &self.phase[layer];
        Array1::from_shape_fn(p.len(), |r| {
            (p[r] + w[[r, 0]] * x.x + w[[r, 1]] * x.y + w[[r, 2]] * x.z).sin()
        })
    }

    /// Output of head `level` at `x`.
    pub fn forward(&self, x: &Point3<f64>, level: usize) -> Result<f64, NetworkError> {
        if level < 1 || level >= self.layers() {
            return Err(NetworkError::Level {
                level,
                max: self.layers() - 1,
            });
        }
        let mut z = self.embed(0, x);
        for i in 1..=level {
            let h = self.weights[i - 1].dot(&z) + &self.biases[i - 1];
            z = self.embed(i, x) * h;
        }
        Ok(self.head_weights[level - 1].dot(&z) + self.head_biases[level - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;

    fn small() -> NetworkParams {
        let cfg = NetworkConfig {
            layers: 4,
            hidden: 5,
            latent: 3,
            max_bandwidth: 10.0,
            ..NetworkConfig::desk()
        };
        NetworkParams::init(&cfg, 9).unwrap()
    }

    #[test]
    fn collapsed_matches_conditional() {
        let p = small();
        let l = [0.4, -0.9, 0.05];
        let u = collapse_latent(&p, &l).unwrap();
        let x = Point3::new(0.1, -0.2, 0.3);
        let full = p.forward_all(&x, &l).unwrap();
        for level in 1..4 {
            let a = full.sdf[level - 1];
            let b = u.forward(&x, level).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-15, "{a} {b}");
        }
    }

    #[test]
    fn zero_latent_collapses_without_division() {
        let p = small();
        let u = collapse_latent(&p, &[0.0; 3]).unwrap();
        assert!(u.phase.iter().all(|ph| ph.iter().all(|v| v.is_finite())));
        let x = Point3::new(0.3, 0.3, -0.1);
        let a = p.forward_all(&x, &[0.0; 3]).unwrap().sdf[2];
        assert!((a - u.forward(&x, 3).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn other_conditionings_rejected() {
        let cfg = NetworkConfig {
            conditioning: Conditioning::OutputConcat,
            ..NetworkConfig::desk()
        };
        let p = NetworkParams::init(&cfg, 0).unwrap();
        assert!(collapse_latent(&p, &vec![0.0; cfg.latent]).is_err());
    }
}
