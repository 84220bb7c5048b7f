//! Linear one-class SVM in the nu formulation.
//!
//! Solves `min 1/2 |w|^2 - rho + 1/(nu N) sum max(0, rho - w.x_i)` by plain
//! subgradient descent with a decaying step, then re-solves `rho` exactly as
//! the `ceil(nu N)`-th smallest projection, which caps the training outlier
//! fraction at `nu` by construction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Subgradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcsvmConfig {
    pub iterations: usize,
    pub initial_step: f64,
}

impl Default for OcsvmConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            initial_step: 0.1,
        }
    }
}

/// Fitted linear one-class SVM: decision score `s(x) = w.x - rho`,
/// anomalous iff `s(x) < 0` (boundary inclusive as normal).
#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel {
    pub weights: Vec<f64>,
    pub offset: f64,
    pub nu: f64,
}

/// Scores and anomaly flags for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmScores {
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
}

impl OcsvmModel {
    pub fn fit(points: &Matrix, nu: f64, cfg: &OcsvmConfig) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(CoreError::Config(format!(
                "nu must lie in (0, 1], got {nu}"
            )));
        }
        let n = points.rows();
        if n == 0 {
            return Err(CoreError::Count("cannot fit on an empty set".into()));
        }
        if cfg.iterations == 0 || !(cfg.initial_step > 0.0) {
            return Err(CoreError::Config("iterations and step must be positive".into()));
        }
        let dim = points.cols();

        // Fixed initialization: w along the data mean, falling back to the
        // first axis when the mean is degenerate.
        let mut w = vec![0.0; dim];
        for i in 0..n {
            for (acc, &v) in w.iter_mut().zip(points.row(i)) {
                *acc += v;
            }
        }
        let norm = libm::sqrt(w.iter().map(|v| v * v).sum::<f64>()) / n as f64;
        if norm > 1e-12 {
            let inv = 1.0 / (norm * n as f64);
            for v in &mut w {
                *v *= inv;
            }
        } else {
            w.fill(0.0);
            w[0] = 1.0;
        }
        let mut rho = quantile_offset(points, &w, nu);

        let slack_scale = 1.0 / (nu * n as f64);
        let mut grad_w = vec![0.0; dim];
        for t in 1..=cfg.iterations {
            let step = cfg.initial_step / libm::sqrt(t as f64);
            grad_w.copy_from_slice(&w);
            let mut active = 0usize;
            for i in 0..n {
                let projection = dot(&w, points.row(i));
                if projection < rho {
                    active += 1;
                    for (g, &x) in grad_w.iter_mut().zip(points.row(i)) {
                        *g -= slack_scale * x;
                    }
                }
            }
            let grad_rho = -1.0 + active as f64 * slack_scale;
            for (wi, g) in w.iter_mut().zip(&grad_w) {
                *wi -= step * g;
            }
            rho -= step * grad_rho;
            if w.iter().any(|v| !v.is_finite()) || !rho.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "one-class SVM diverged at iteration {t}"
                )));
            }
        }

        if libm::sqrt(w.iter().map(|v| v * v).sum::<f64>()) < 1e-10 {
            return Err(CoreError::Numeric(
                "one-class SVM collapsed to a zero weight vector".into(),
            ));
        }
        // Exact coordinate step in rho: the minimizer for fixed w is the
        // ceil(nu N)-th smallest projection.
        let rho = quantile_offset(points, &w, nu);
        Ok(Self {
            weights: w,
            offset: rho,
            nu,
        })
    }

    pub fn score(&self, points: &Matrix) -> Result<OcsvmScores> {
        if points.cols() != self.weights.len() {
            return Err(CoreError::Shape(format!(
                "points have {} columns but the model has {} weights",
                points.cols(),
                self.weights.len()
            )));
        }
        let scores: Vec<f64> = (0..points.rows())
            .map(|i| dot(&self.weights, points.row(i)) - self.offset)
            .collect();
        let flags = scores.iter().map(|&s| s < 0.0).collect();
        Ok(OcsvmScores { scores, flags })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quantile_offset(points: &Matrix, w: &[f64], nu: f64) -> f64 {
    let n = points.rows();
    let mut projections: Vec<f64> = (0..n).map(|i| dot(w, points.row(i))).collect();
    projections.sort_by(|a, b| a.partial_cmp(b).expect("finite projections"));
    let k = libm::ceil(nu * n as f64) as usize;
    projections[k.clamp(1, n) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn gaussian_cloud(n: usize, dim: usize, center: f64, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        Matrix::from_fn(n, dim, |_, _| rng.normal_scaled(center, 1.0))
    }

    #[test]
    fn identical_points_sit_on_the_boundary() {
        let points = Matrix::from_fn(12, 3, |_, _| 0.5);
        let model = OcsvmModel::fit(&points, 0.25, &OcsvmConfig::default()).unwrap();
        let scored = model.score(&points).unwrap();
        for &s in &scored.scores {
            assert!(s.abs() < 1e-9, "score {s}");
        }
        assert!(scored.flags.iter().all(|&f| !f));
    }

    #[test]
    fn nu_bounds_training_outlier_fraction() {
        for seed in 0..5 {
            let points = gaussian_cloud(400, 4, 2.0, seed);
            for nu in [0.05, 0.1, 0.3] {
                let model = OcsvmModel::fit(&points, nu, &OcsvmConfig::default()).unwrap();
                let scored = model.score(&points).unwrap();
                let flagged = scored.flags.iter().filter(|&&f| f).count() as f64 / 400.0;
                assert!(
                    flagged <= nu + 0.02,
                    "seed {seed}, nu {nu}: flagged {flagged}"
                );
            }
        }
    }

    #[test]
    fn gaussian_cloud_flags_near_nu() {
        let points = gaussian_cloud(1000, 5, 3.0, 7);
        let model = OcsvmModel::fit(&points, 0.1, &OcsvmConfig::default()).unwrap();
        let scored = model.score(&points).unwrap();
        let flagged = scored.flags.iter().filter(|&&f| f).count() as f64 / 1000.0;
        assert!(
            (0.06..=0.14).contains(&flagged),
            "flagged fraction {flagged}"
        );
    }

    #[test]
    fn score_is_affine_in_the_input() {
        let points = gaussian_cloud(200, 3, 2.0, 11);
        let model = OcsvmModel::fit(&points, 0.2, &OcsvmConfig::default()).unwrap();
        let x = [1.5, -0.5, 2.0];
        let alpha = 3.0;
        let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        let s1 = model
            .score(&Matrix::from_vec(1, 3, scaled).unwrap())
            .unwrap()
            .scores[0];
        let wx = dot(&model.weights, &x);
        assert!((s1 - (alpha * wx - model.offset)).abs() < 1e-12);
    }

    #[test]
    fn boundary_point_is_not_anomalous() {
        let points = gaussian_cloud(100, 2, 2.0, 13);
        let model = OcsvmModel::fit(&points, 0.1, &OcsvmConfig::default()).unwrap();
        // Build a point with w.x exactly rho.
        let w_norm_sq: f64 = model.weights.iter().map(|v| v * v).sum();
        let x: Vec<f64> = model
            .weights
            .iter()
            .map(|v| v * model.offset / w_norm_sq)
            .collect();
        let scored = model.score(&Matrix::from_vec(1, 2, x).unwrap()).unwrap();
        assert!(scored.scores[0].abs() < 1e-9);
        assert!(!scored.flags[0]);
    }

    #[test]
    fn fit_is_deterministic() {
        let points = gaussian_cloud(150, 3, 1.5, 17);
        let a = OcsvmModel::fit(&points, 0.15, &OcsvmConfig::default()).unwrap();
        let b = OcsvmModel::fit(&points, 0.15, &OcsvmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_nu_is_rejected() {
        let points = gaussian_cloud(10, 2, 1.0, 19);
        assert!(OcsvmModel::fit(&points, 0.0, &OcsvmConfig::default()).is_err());
        assert!(OcsvmModel::fit(&points, 1.5, &OcsvmConfig::default()).is_err());
    }

    #[test]
    fn dimension_mismatch_at_scoring_is_rejected() {
        let points = gaussian_cloud(50, 2, 1.0, 23);
        let model = OcsvmModel::fit(&points, 0.2, &OcsvmConfig::default()).unwrap();
        assert!(matches!(
            model.score(&Matrix::zeros(1, 3)),
            Err(CoreError::Shape(_))
        ));
    }
}
