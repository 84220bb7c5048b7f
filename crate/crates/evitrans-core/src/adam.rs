//! Adam optimizer with bias correction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Adam hyperparameters. The defaults are the usual lr=1e-3, β1=0.9,
/// β2=0.999, ε=1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(CoreError::Config("betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Optimizer state: first and second moment accumulators per parameter
/// block, plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    /// Creates zeroed moments for blocks of the given sizes.
    pub fn new(block_sizes: &[usize], config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            first_moment: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One Adam update over all parameter blocks.
    ///
    /// `params` and `grads` must match the block layout given at
    /// construction. A non-finite gradient aborts before any parameter is
    /// touched, reporting the offending block.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != self.first_moment.len() {
            return Err(CoreError::Shape(format!(
                "expected {} parameter blocks, got {} params / {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for (idx, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first_moment[idx].len() || g.len() != self.first_moment[idx].len() {
                return Err(CoreError::Shape(format!(
                    "parameter block {idx}: moment size {} vs params {} / grads {}",
                    self.first_moment[idx].len(),
                    p.len(),
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::Numeric(format!(
                    "non-finite gradient in parameter block {idx}"
                )));
            }
        }

        self.step_count += 1;
        let t = self.step_count;
        let c = &self.config;
        let m_correction = 1.0 - libm::pow(c.beta1, t as f64);
        let v_correction = 1.0 - libm::pow(c.beta2, t as f64);

        for (idx, (block, grad)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            for (((p, &g), mi), vi) in block.iter_mut().zip(*grad).zip(m).zip(v) {
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * g;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * g * g;
                let m_hat = *mi / m_correction;
                let v_hat = *vi / v_correction;
                *p -= c.learning_rate * m_hat / (libm::sqrt(v_hat) + c.epsilon);
            }
        }
        Ok(())
    }
}
