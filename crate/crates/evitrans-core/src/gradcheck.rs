//! Central finite-difference gradient checking.
//!
//! Compares analytic gradients against `(f(θ+h) - f(θ-h)) / 2h` one entry at
//! a time. The loss closure is evaluated twice at the base point first; any
//! bitwise disagreement means the loss is not deterministic and the check is
//! refused.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Worst relative error observed in one parameter block.
#[derive(Debug, Clone)]
pub struct BlockCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Entry index of the worst mismatch within the block.
    pub worst_entry: usize,
}

/// Outcome of a full gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockCheck>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Relative error with an absolute floor so that near-zero gradient pairs do
/// not blow up on finite-difference noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

/// Checks analytic gradients for a deterministic scalar loss.
///
/// `base_params` is the flattened parameter blocks at the evaluation point,
/// `analytic_grads` the gradients claimed for those blocks, and `loss_at`
/// evaluates the loss for an arbitrary parameter setting with the same
/// layout.
pub fn grad_check(
    names: &[&str],
    base_params: &[Vec<f64>],
    analytic_grads: &[Vec<f64>],
    mut loss_at: impl FnMut(&[Vec<f64>]) -> Result<f64>,
    step: f64,
) -> Result<GradCheckReport> {
    if names.len() != base_params.len() || analytic_grads.len() != base_params.len() {
        return Err(CoreError::Check(format!(
            "block count mismatch: {} names, {} params, {} grads",
            names.len(),
            base_params.len(),
            analytic_grads.len()
        )));
    }
    for (idx, (p, g)) in base_params.iter().zip(analytic_grads).enumerate() {
        if p.len() != g.len() {
            return Err(CoreError::Check(format!(
                "block {} ({}): {} params vs {} gradient entries",
                idx,
                names[idx],
                p.len(),
                g.len()
            )));
        }
    }
    if !(step > 0.0) {
        return Err(CoreError::Check("step must be positive".to_string()));
    }

    let reference = loss_at(base_params)?;
    let again = loss_at(base_params)?;
    if reference.to_bits() != again.to_bits() {
        return Err(CoreError::Check(format!(
            "loss is not deterministic: {reference} vs {again} at the same point"
        )));
    }

    let mut work: Vec<Vec<f64>> = base_params.to_vec();
    let mut blocks = Vec::with_capacity(base_params.len());
    let mut overall: f64 = 0.0;
    for (b, name) in names.iter().enumerate() {
        let mut worst = 0.0;
        let mut worst_entry = 0;
        for i in 0..work[b].len() {
            let original = work[b][i];
            work[b][i] = original + step;
            let plus = loss_at(&work)?;
            work[b][i] = original - step;
            let minus = loss_at(&work)?;
            work[b][i] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let rel = relative_error(analytic_grads[b][i], numeric);
            if rel > worst {
                worst = rel;
                worst_entry = i;
            }
        }
        overall = overall.max(worst);
        blocks.push(BlockCheck {
            name: name.to_string(),
            max_rel_error: worst,
            worst_entry,
        });
    }
    Ok(GradCheckReport {
        blocks,
        max_rel_error: overall,
    })
}
