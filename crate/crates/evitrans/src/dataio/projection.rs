//! Two-dimensional principal-component export for latent inspection.

use std::fs;
use std::path::Path;

use evitrans_core::Matrix;

use crate::error::{AppError, Result};

/// Projects rows onto their top two principal components.
///
/// Returns the N x 2 coordinates and the two component variances
/// (descending). Deterministic: eigenvector signs are fixed so the
/// largest-magnitude entry is positive.
pub fn pca_top2(points: &Matrix) -> Result<(Matrix, [f64; 2])> {
    let n = points.rows();
    let d = points.cols();
    if n == 0 {
        return Err(AppError::Data("cannot project an empty matrix".into()));
    }
    if d < 2 {
        return Err(AppError::Config(
            "projection needs at least two dimensions".into(),
        ));
    }

    // Center columns.
    let mut means = vec![0.0; d];
    for i in 0..n {
        for (m, &v) in means.iter_mut().zip(points.row(i)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let centered = Matrix::from_fn(n, d, |i, j| points.get(i, j) - means[j]);
    let covariance = centered.t_matmul(&centered)?.scale(1.0 / n as f64);

    let (eigenvalues, eigenvectors) = jacobi_eigen(&covariance);
    // Order components by descending eigenvalue, ties on the lower index.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .partial_cmp(&eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let mut coords = Matrix::zeros(n, 2);
    let mut variances = [0.0; 2];
    for (c, &component) in order.iter().take(2).enumerate() {
        let mut axis: Vec<f64> = (0..d).map(|j| eigenvectors.get(j, component)).collect();
        let mut max_idx = 0;
        for (j, v) in axis.iter().enumerate() {
            if v.abs() > axis[max_idx].abs() {
                max_idx = j;
            }
        }
        if axis[max_idx] < 0.0 {
            for v in &mut axis {
                *v = -*v;
            }
        }
        for i in 0..n {
            let value: f64 = centered.row(i).iter().zip(&axis).map(|(a, b)| a * b).sum();
            coords.set(i, c, value);
        }
        variances[c] = eigenvalues[component].max(0.0);
    }
    Ok((coords, variances))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns (eigenvalues, eigenvector columns).
fn jacobi_eigen(symmetric: &Matrix) -> (Vec<f64>, Matrix) {
    let d = symmetric.rows();
    let mut a = symmetric.clone();
    let mut v = Matrix::identity(d);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a.get(p, q).abs();
            }
        }
        if off < 1e-12 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..d {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..d {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let eigenvalues = (0..d).map(|i| a.get(i, i)).collect();
    (eigenvalues, v)
}

/// Writes the 2D projection with one labeled row per sample.
pub fn export_latent_projection(
    latents: &Matrix,
    labels: &[usize],
    path: &Path,
) -> Result<()> {
    fs::write(path, render_projection(latents, labels)?)?;
    Ok(())
}

/// Renders the projection file contents (header plus one row per sample).
pub fn render_projection(latents: &Matrix, labels: &[usize]) -> Result<String> {
    if labels.len() != latents.rows() {
        return Err(AppError::Data(format!(
            "{} labels for {} latent rows",
            labels.len(),
            latents.rows()
        )));
    }
    let (coords, _) = pca_top2(latents)?;
    let mut out = String::from("pc1\tpc2\tlabel\n");
    for i in 0..coords.rows() {
        out.push_str(&format!(
            "{:.9e}\t{:.9e}\t{}\n",
            coords.get(i, 0),
            coords.get(i, 1),
            labels[i]
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use evitrans_core::rng::Rng;
    use tempfile::tempdir;

    fn column_variance(m: &Matrix, col: usize) -> f64 {
        let n = m.rows() as f64;
        let mean: f64 = (0..m.rows()).map(|i| m.get(i, col)).sum::<f64>() / n;
        (0..m.rows())
            .map(|i| {
                let d = m.get(i, col) - mean;
                d * d
            })
            .sum::<f64>()
            / n
    }

    #[test]
    fn ten_dim_latents_project_to_two_columns() {
        let mut rng = Rng::new(3);
        let latents = Matrix::from_fn(40, 10, |_, _| rng.normal());
        let (coords, variances) = pca_top2(&latents).unwrap();
        assert_eq!(coords.shape(), (40, 2));
        assert!(variances[0] >= variances[1]);
    }

    #[test]
    fn component_variances_are_ordered_in_the_export() {
        let mut rng = Rng::new(5);
        let latents = Matrix::from_fn(100, 6, |_, j| {
            // Column 2 dominates the variance.
            let scale = if j == 2 { 4.0 } else { 0.3 };
            rng.normal_scaled(0.0, scale)
        });
        let (coords, variances) = pca_top2(&latents).unwrap();
        assert!(variances[0] > variances[1]);
        assert!(column_variance(&coords, 0) >= column_variance(&coords, 1));
        // PC1 variance approximates the dominant axis variance (16).
        assert!((variances[0] - 16.0).abs() < 3.0, "pc1 variance {}", variances[0]);
    }

    #[test]
    fn line_structure_collapses_to_one_component() {
        // Points on y = 2x: the second component carries no variance.
        let points = Matrix::from_fn(20, 2, |i, j| {
            let t = i as f64 - 10.0;
            if j == 0 {
                t
            } else {
                2.0 * t
            }
        });
        let (coords, variances) = pca_top2(&points).unwrap();
        assert!(variances[1].abs() < 1e-9);
        for i in 0..coords.rows() {
            assert!(coords.get(i, 1).abs() < 1e-9);
        }
    }

    #[test]
    fn export_is_byte_deterministic() {
        let mut rng = Rng::new(9);
        let latents = Matrix::from_fn(15, 5, |_, _| rng.uniform());
        let labels: Vec<usize> = (0..15).map(|i| i % 2).collect();
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.tsv");
        let b = dir.path().join("b.tsv");
        export_latent_projection(&latents, &labels, &a).unwrap();
        export_latent_projection(&latents, &labels, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("pc1\tpc2\tlabel\n"));
        assert_eq!(text.lines().count(), 16);
    }

    #[test]
    fn label_length_mismatch_is_rejected() {
        let latents = Matrix::zeros(3, 4);
        assert!(render_projection(&latents, &[0, 1]).is_err());
    }
}
