use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use super::MetricsError;
use crate::meshing::ScalarField;
use crate::network::{NetworkError, NetworkParams};

/// Default samples per line.
pub const LINE_SAMPLES: usize = 1024;
/// Margin between the theoretical support of a head and the tested cutoff.
pub const CUTOFF_MARGIN: f64 = 1.1;

/// Fraction of the spectral energy of `values` (spacing `dx`) at angular
/// frequencies strictly above `cutoff`, after removing the mean and applying
/// a periodic Hann window. The DC bin is excluded from both sums.
///
/// Requires a sampling rate of at least four times the Nyquist rate of the
/// cutoff, i.e. `π / dx ≥ 4 · cutoff`. A signal with no energy outside DC
/// returns 0.
pub fn spectrum_above_cutoff(values: &[f64], dx: f64, cutoff: f64) -> Result<f64, MetricsError> {
    let n = values.len();
    if n < 8 {
        return Err(MetricsError::Spectrum(format!("need at least 8 samples, got {n}")));
    }
    if !(dx > 0.0 && dx.is_finite() && cutoff > 0.0 && cutoff.is_finite()) {
        return Err(MetricsError::Spectrum(format!("bad spacing {dx} or cutoff {cutoff}")));
    }
    if PI / dx < 4.0 * cutoff {
        return Err(MetricsError::Spectrum(format!(
            "undersampled: Nyquist frequency {} is below 4 × cutoff {}",
            PI / dx,
            cutoff
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buffer: Vec<Complex<f64>> = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = 0.5 * (1.0 - (2.0 * PI * k as f64 / n as f64).cos());
            Complex::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let (mut total, mut above) = (0.0, 0.0);
    for (k, c) in buffer.iter().enumerate().skip(1) {
        let omega = 2.0 * PI * k.min(n - k) as f64 / (n as f64 * dx);
        let energy = c.norm_sqr();
        total += energy;
        if omega > cutoff {
            above += energy;
        }
    }
    Ok(if total > 0.0 { above / total } else { 0.0 })
}

/// Sample spacing giving a Nyquist frequency of five times `cutoff`.
pub fn line_spacing(cutoff: f64) -> f64 {
    PI / (5.0 * cutoff)
}

/// Axis-aligned sampling line centred on a point of the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumLine {
    pub center: Point3<f64>,
    pub axis: usize,
    pub spacing: f64,
    pub samples: usize,
}

impl SpectrumLine {
    pub fn points(&self) -> Vec<Point3<f64>> {
        let dir = Vector3::ith(self.axis, 1.0);
        let half = self.samples as f64 / 2.0;
        (0..self.samples)
            .map(|k| self.center + dir * ((k as f64 - half) * self.spacing))
            .collect()
    }
}

/// `count` lines through uniformly random points of the unit cube, along
/// uniformly random coordinate axes.
pub fn random_axis_lines(count: usize, samples: usize, spacing: f64, seed: u64) -> Vec<SpectrumLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| SpectrumLine {
            center: Point3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            ),
            axis: rng.random_range(0..3),
            spacing,
            samples,
        })
        .collect()
}

/// Out-of-band energy fraction of `field` along each line.
pub fn field_spectrum(
    field: &dyn ScalarField,
    lines: &[SpectrumLine],
    cutoff: f64,
) -> Result<Vec<f64>, MetricsError> {
    lines
        .iter()
        .map(|line| {
            let points = line.points();
            let mut values = vec![0.0; points.len()];
            field.evaluate(&points, &mut values);
            spectrum_above_cutoff(&values, line.spacing, cutoff)
        })
        .collect()
}

/// Tested cutoff for head `level`: the summed layer bounds up to that
/// level, with a 10% margin.
pub fn level_cutoff(params: &NetworkParams, level: usize) -> Result<f64, NetworkError> {
    let max = params.config.heads();
    if level == 0 || level > max {
        return Err(NetworkError::Level { level, max });
    }
    Ok(CUTOFF_MARGIN * params.bounds().cumulative(level))
}
