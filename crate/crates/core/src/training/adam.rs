/// Adam moment constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moments for a list of flat tensors sharing one step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(sizes: impl IntoIterator<Item = usize>, config: AdamConfig) -> Self {
        let first: Vec<Vec<f64>> = sizes.into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            config,
            second: first.clone(),
            first,
            step: 0,
        }
    }

    /// One bias-corrected update of every tensor.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) {
        assert_eq!(params.len(), self.first.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.first.len(), "gradient count mismatch");
        self.step += 1;
        for k in 0..params.len() {
            adam_kernel(
                &self.config,
                self.step,
                params[k],
                grads[k],
                &mut self.first[k],
                &mut self.second[k],
                lr,
            );
        }
    }
}

/// Per-row Adam for the codebook: only rows present in a batch are
/// updated, each with its own step counter for bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct RowAdamState {
    pub config: AdamConfig,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub steps: Vec<u64>,
}

impl RowAdamState {
    pub fn new(rows: usize, dim: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first: vec![vec![0.0; dim]; rows],
            second: vec![vec![0.0; dim]; rows],
            steps: vec![0; rows],
        }
    }

    pub fn update_row(&mut self, row: usize, value: &mut [f64], grad: &[f64], lr: f64) {
        self.steps[row] += 1;
        adam_kernel(
            &self.config,
            self.steps[row],
            value,
            grad,
            &mut self.first[row],
            &mut self.second[row],
            lr,
        );
    }
}

fn adam_kernel(
    cfg: &AdamConfig,
    step: u64,
    value: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
) {
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        value[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut a = vec![1.0, -2.0, 3.0];
        let mut s = AdamState::new([3], AdamConfig::default());
        for _ in 0..5 {
            s.update(&mut [&mut a], &[&[0.0; 3]], 0.1);
        }
        assert_eq!(a, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut x = [0.5];
        let mut s = AdamState::new([1], AdamConfig::default());
        s.update(&mut [&mut x], &[&[1.0]], 0.1);
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + ε)
        let expected = 0.5 - 0.1 / (1.0 + 1e-8);
        assert!((x[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn row_state_counts_per_row() {
        let mut s = RowAdamState::new(3, 2, AdamConfig::default());
        let mut row = [0.0, 0.0];
        s.update_row(1, &mut row, &[1.0, -1.0], 0.01);
        s.update_row(1, &mut row, &[1.0, -1.0], 0.01);
        assert_eq!(s.steps, vec![0, 2, 0]);
        assert!((row[0] + 0.02).abs() < 1e-9 && (row[1] - 0.02).abs() < 1e-9);
    }
}
