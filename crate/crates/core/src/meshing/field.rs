use nalgebra::Point3;
use rayon::prelude::*;

use super::ScalarField;
use crate::network::{NetworkError, NetworkParams};

const BLOCK: usize = 4096;

/// One head of a trained network at a fixed latent code, as a scalar field.
#[derive(Debug, Clone)]
pub struct NetworkField<'a> {
    params: &'a NetworkParams,
    latent: Vec<f64>,
    level: usize,
}

impl<'a> NetworkField<'a> {
    pub fn new(params: &'a NetworkParams, latent: &[f64], level: usize) -> Result<Self, NetworkError> {
        // validates dimensions and level once, up front
        params.forward_batch(&[], latent, level)?;
        Ok(Self {
            params,
            latent: latent.to_vec(),
            level,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }
}

impl ScalarField for NetworkField<'_> {
    fn evaluate(&self, points: &[Point3<f64>], out: &mut [f64]) {
        points
            .par_chunks(BLOCK)
            .zip(out.par_chunks_mut(BLOCK))
            .for_each(|(p, o)| {
                let v = self
                    .params
                    .forward_batch(p, &self.latent, self.level)
                    .expect("validated at construction");
                o.copy_from_slice(&v);
            });
    }
}
