//! Lloyd's algorithm with k-means++ seeding and restarts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, Rng};

const MAX_ITERATIONS: usize = 300;

/// Fitted k-means model.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Matrix,
    pub k: usize,
    pub inertia: f64,
    pub seed: u64,
    /// Fit-time assignment of each training row.
    pub assignments: Vec<usize>,
}

impl KMeansModel {
    /// Runs `n_init` seeded restarts and keeps the lowest-inertia result.
    pub fn fit(points: &Matrix, k: usize, seed: u64, n_init: usize) -> Result<Self> {
        if k == 0 {
            return Err(CoreError::Count("k must be at least 1".into()));
        }
        if points.rows() < k {
            return Err(CoreError::Count(format!(
                "{} points cannot form {k} clusters",
                points.rows()
            )));
        }
        if n_init == 0 {
            return Err(CoreError::Count("n_init must be at least 1".into()));
        }
        let mut best: Option<(f64, Matrix, Vec<usize>)> = None;
        for restart in 0..n_init {
            let mut rng = Rng::new(derive_seed(seed, restart as u64));
            let (centroids, assignments, inertia) = lloyd(points, k, &mut rng)?;
            if best.as_ref().is_none_or(|(b, _, _)| inertia < *b) {
                best = Some((inertia, centroids, assignments));
            }
        }
        let (inertia, centroids, assignments) = best.expect("n_init >= 1");
        Ok(Self {
            centroids,
            k,
            inertia,
            seed,
            assignments,
        })
    }

    /// Nearest-centroid assignment; ties break toward the lower cluster id.
    pub fn predict(&self, points: &Matrix) -> Result<Vec<usize>> {
        if points.cols() != self.centroids.cols() {
            return Err(CoreError::Shape(format!(
                "points have {} columns but centroids have {}",
                points.cols(),
                self.centroids.cols()
            )));
        }
        Ok((0..points.rows())
            .map(|i| nearest(points, i, &self.centroids))
            .collect())
    }
}

fn nearest(points: &Matrix, row: usize, centroids: &Matrix) -> usize {
    let mut best = 0;
    let mut best_dist = Matrix::row_sq_dist(points, row, centroids, 0);
    for c in 1..centroids.rows() {
        let d = Matrix::row_sq_dist(points, row, centroids, c);
        if d < best_dist {
            best_dist = d;
            best = c;
        }
    }
    best
}

/// k-means++ seeding: each next centroid is drawn with probability
/// proportional to its squared distance from the chosen set.
fn plus_plus_init(points: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(points.row(first));

    let mut d2 = vec![0.0; n];
    for c in 1..k {
        let mut total = 0.0;
        for (i, d) in d2.iter_mut().enumerate() {
            let mut min = f64::INFINITY;
            for chosen in 0..c {
                min = min.min(Matrix::row_sq_dist(points, i, &centroids, chosen));
            }
            *d = min;
            total += min;
        }
        let pick = if total <= 0.0 {
            rng.below(n)
        } else {
            let target = rng.uniform() * total;
            let mut cumulative = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                cumulative += d;
                if cumulative > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
    }
    centroids
}

fn lloyd(points: &Matrix, k: usize, rng: &mut Rng) -> Result<(Matrix, Vec<usize>, f64)> {
    let n = points.rows();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignments: Vec<usize> = (0..n).map(|i| nearest(points, i, &centroids)).collect();
    let mut previous_inertia = f64::INFINITY;

    for _ in 0..MAX_ITERATIONS {
        // Update step: centroid = mean of assigned points; empty clusters
        // keep their previous centroid.
        let mut sums = Matrix::zeros(k, points.cols());
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, &v) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }

        let next: Vec<usize> = (0..n).map(|i| nearest(points, i, &centroids)).collect();
        let inertia = inertia_of(points, &centroids, &next);
        debug_assert!(
            inertia <= previous_inertia * (1.0 + 1e-9) + 1e-12,
            "inertia increased: {previous_inertia} -> {inertia}"
        );
        previous_inertia = inertia;
        if next == assignments {
            break;
        }
        assignments = next;
    }
    if !centroids.is_finite() {
        return Err(CoreError::Numeric("non-finite centroid".into()));
    }
    let inertia = inertia_of(points, &centroids, &assignments);
    Ok((centroids, assignments, inertia))
}

fn inertia_of(points: &Matrix, centroids: &Matrix, assignments: &[usize]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| Matrix::row_sq_dist(points, i, centroids, a))
        .sum()
}
