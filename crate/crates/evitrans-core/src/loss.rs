//! Reconstruction and evidence objectives.
//!
//! The reconstruction loss is structural similarity: per sample we minimize
//! `1 - SSIM(x, x')`, which has its optimum at perfect reconstruction.
//! Evidence enters through softmax cross-entropy heads, and the combined
//! objective adds the mean head loss scaled by `lambda`.

use alloc::format;

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Clipping floor inside `ln` for cross-entropy.
pub const LOG_CLIP: f64 = 1e-12;

/// How SSIM statistics are pooled over a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsimMode {
    /// One window spanning the whole vector.
    Global,
    /// Mean SSIM over non-overlapping windows of the given size.
    Windowed(usize),
}

/// SSIM stabilizers and dynamic range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub c1: f64,
    pub c2: f64,
    pub dynamic_range: f64,
    pub mode: SsimMode,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self::new(1.0, SsimMode::Global).expect("default config is valid")
    }
}

impl SsimConfig {
    /// Standard stabilizers `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`.
    pub fn new(dynamic_range: f64, mode: SsimMode) -> Result<Self> {
        if !(dynamic_range > 0.0) {
            return Err(CoreError::Config(format!(
                "dynamic range must be positive, got {dynamic_range}"
            )));
        }
        if let SsimMode::Windowed(w) = mode {
            if w < 2 {
                return Err(CoreError::Config(format!(
                    "window size must be at least 2, got {w}"
                )));
            }
        }
        Ok(Self {
            c1: (0.01 * dynamic_range) * (0.01 * dynamic_range),
            c2: (0.03 * dynamic_range) * (0.03 * dynamic_range),
            dynamic_range,
            mode,
        })
    }
}

/// SSIM of one window plus its gradient with respect to the reconstruction.
///
/// Population statistics; the gradient accounts for the mean, variance and
/// covariance dependence on every reconstructed entry.
fn ssim_window(x: &[f64], y: &[f64], cfg: &SsimConfig, grad: Option<&mut [f64]>) -> f64 {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    let mut cov = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        var_x += dx * dx;
        var_y += dy * dy;
        cov += dx * dy;
    }
    var_x /= n;
    var_y /= n;
    cov /= n;

    let a1 = 2.0 * mean_x * mean_y + cfg.c1;
    let a2 = 2.0 * cov + cfg.c2;
    let b1 = mean_x * mean_x + mean_y * mean_y + cfg.c1;
    let b2 = var_x + var_y + cfg.c2;
    let numerator = a1 * a2;
    let denominator = b1 * b2;
    let value = numerator / denominator;

    if let Some(out) = grad {
        for (i, g) in out.iter_mut().enumerate() {
            let d_num = (2.0 * mean_x / n) * a2 + a1 * (2.0 / n) * (x[i] - mean_x);
            let d_den = (2.0 * mean_y / n) * b2 + b1 * (2.0 / n) * (y[i] - mean_y);
            *g = (d_num * denominator - numerator * d_den) / (denominator * denominator);
        }
    }
    value
}

fn windows(len: usize, mode: SsimMode) -> usize {
    match mode {
        SsimMode::Global => 1,
        SsimMode::Windowed(w) => len.div_ceil(w),
    }
}

/// SSIM between two equally sized vectors; 1.0 exactly at identity.
pub fn ssim(x: &[f64], x_prime: &[f64], cfg: &SsimConfig) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(CoreError::Shape(format!(
            "ssim operands differ in length: {} vs {}",
            x.len(),
            x_prime.len()
        )));
    }
    if x.is_empty() {
        return Err(CoreError::Shape("ssim of empty vectors".into()));
    }
    match cfg.mode {
        SsimMode::Global => Ok(ssim_window(x, x_prime, cfg, None)),
        SsimMode::Windowed(w) => {
            let count = windows(x.len(), cfg.mode) as f64;
            let mut total = 0.0;
            for (cx, cy) in x.chunks(w).zip(x_prime.chunks(w)) {
                total += ssim_window(cx, cy, cfg, None);
            }
            Ok(total / count)
        }
    }
}

/// Mean `1 - SSIM` over a batch, with the analytic gradient with respect to
/// the reconstruction matrix.
pub fn ssim_loss(batch_x: &Matrix, batch_x_prime: &Matrix, cfg: &SsimConfig) -> Result<(f64, Matrix)> {
    if batch_x.shape() != batch_x_prime.shape() {
        return Err(CoreError::Shape(format!(
            "batch shapes differ: {:?} vs {:?}",
            batch_x.shape(),
            batch_x_prime.shape()
        )));
    }
    let n = batch_x.rows();
    if n == 0 {
        return Err(CoreError::Count("empty batch".into()));
    }
    let window_count = windows(batch_x.cols(), cfg.mode) as f64;
    let mut grad = Matrix::zeros(n, batch_x.cols());
    let mut loss = 0.0;
    for i in 0..n {
        let x = batch_x.row(i);
        let y = batch_x_prime.row(i);
        let grad_row = grad.row_mut(i);
        let mut sample_ssim = 0.0;
        match cfg.mode {
            SsimMode::Global => {
                sample_ssim = ssim_window(x, y, cfg, Some(grad_row));
            }
            SsimMode::Windowed(w) => {
                for ((cx, cy), cg) in x.chunks(w).zip(y.chunks(w)).zip(grad_row.chunks_mut(w)) {
                    sample_ssim += ssim_window(cx, cy, cfg, Some(cg));
                }
                sample_ssim /= window_count;
            }
        }
        loss += 1.0 - sample_ssim;
        // d(1 - ssim)/dy scaled by the batch and window means.
        let scale = -1.0 / (n as f64 * window_count);
        for g in grad.row_mut(i) {
            *g *= scale;
        }
    }
    Ok((loss / n as f64, grad))
}

/// Mean softmax cross-entropy between one-hot evidence and head
/// probabilities, with the gradient with respect to the head logits,
/// `(Q - V) / N`.
pub fn softmax_cross_entropy(evidence: &Matrix, head_output: &Matrix) -> Result<(f64, Matrix)> {
    if evidence.shape() != head_output.shape() {
        return Err(CoreError::Shape(format!(
            "evidence is {:?} but head output is {:?}",
            evidence.shape(),
            head_output.shape()
        )));
    }
    let n = evidence.rows();
    if n == 0 {
        return Err(CoreError::Count("empty batch".into()));
    }
    for i in 0..n {
        let row = evidence.row(i);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(CoreError::DegenerateEvidence(format!(
                "evidence row {i} is not one-hot"
            )));
        }
        let sum: f64 = head_output.row(i).iter().sum();
        if (sum - 1.0).abs() > 1e-9 || head_output.row(i).iter().any(|&q| q < 0.0) {
            return Err(CoreError::Numeric(format!(
                "head output row {i} is not a probability distribution (sum {sum})"
            )));
        }
    }
    let mut loss = 0.0;
    for i in 0..n {
        for (&v, &q) in evidence.row(i).iter().zip(head_output.row(i)) {
            if v == 1.0 {
                loss -= libm::log(q + LOG_CLIP);
            }
        }
    }
    let grad = head_output.sub(evidence)?.scale(1.0 / n as f64);
    Ok((loss / n as f64, grad))
}

/// Joint objective weighting: `lambda` and the number of evidence sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferConfig {
    pub lambda: f64,
    pub evidence_count: usize,
}

impl TransferConfig {
    pub fn new(lambda: f64, evidence_count: usize) -> Result<Self> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(CoreError::Config(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        if evidence_count == 0 {
            return Err(CoreError::Config(
                "at least one evidence source is required".into(),
            ));
        }
        Ok(Self {
            lambda,
            evidence_count,
        })
    }
}

/// Combined objective: `ae_loss + lambda * mean(ce_losses)`.
pub fn evidence_transfer_loss(
    ae_loss: f64,
    ce_losses: &[f64],
    cfg: &TransferConfig,
) -> Result<f64> {
    if ce_losses.len() != cfg.evidence_count {
        return Err(CoreError::Config(format!(
            "expected {} cross-entropy terms, got {}",
            cfg.evidence_count,
            ce_losses.len()
        )));
    }
    if cfg.lambda == 0.0 {
        return Ok(ae_loss);
    }
    let mean = ce_losses.iter().sum::<f64>() / cfg.evidence_count as f64;
    Ok(ae_loss + cfg.lambda * mean)
}
