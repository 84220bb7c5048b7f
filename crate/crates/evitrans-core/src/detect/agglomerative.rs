//! Agglomerative hierarchical clustering via Lance-Williams updates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Linkage criterion for merging clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Ward,
    Complete,
    Average,
    Single,
}

impl Linkage {
    pub fn name(&self) -> &'static str {
        match self {
            Linkage::Ward => "ward",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Single => "single",
        }
    }
}

/// Flat clustering cut from the merge hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct AgglomerativeResult {
    /// Per-sample cluster id in `0..n_clusters`, numbered by first member.
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    pub linkage: Linkage,
}

/// Merges singletons bottom-up under the chosen linkage until `n_clusters`
/// remain. Tie-breaking is deterministic: the pair with the lowest indices
/// merges first.
pub fn agglomerative_fit(
    points: &Matrix,
    n_clusters: usize,
    linkage: Linkage,
) -> Result<AgglomerativeResult> {
    let n = points.rows();
    if n_clusters == 0 {
        return Err(CoreError::Count("n_clusters must be at least 1".into()));
    }
    if n < n_clusters {
        return Err(CoreError::Count(format!(
            "{n} points cannot form {n_clusters} clusters"
        )));
    }

    // Pairwise dissimilarities; Ward's recurrence works on squared
    // Euclidean distances, the other linkages on plain distances.
    let mut dissimilarity = vec![f64::INFINITY; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = Matrix::row_sq_dist(points, i, points, j);
            let d = match linkage {
                Linkage::Ward => d2,
                _ => libm::sqrt(d2),
            };
            dissimilarity[i * n + j] = d;
            dissimilarity[j * n + i] = d;
        }
    }

    let mut active = vec![true; n];
    let mut sizes = vec![1usize; n];
    // members[i] holds the original rows of the cluster rooted at i.
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

    for _ in 0..(n - n_clusters) {
        // Closest active pair, lowest indices on ties.
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let d = dissimilarity[i * n + j];
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        let (d_ij, i, j) = best;
        debug_assert!(i < j);

        // Lance-Williams update of dissimilarities to the merged cluster.
        let (ni, nj) = (sizes[i] as f64, sizes[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let d_ik = dissimilarity[i * n + k];
            let d_jk = dissimilarity[j * n + k];
            let merged = match linkage {
                Linkage::Single => d_ik.min(d_jk),
                Linkage::Complete => d_ik.max(d_jk),
                Linkage::Average => (ni * d_ik + nj * d_jk) / (ni + nj),
                Linkage::Ward => {
                    let nk = sizes[k] as f64;
                    ((ni + nk) * d_ik + (nj + nk) * d_jk - nk * d_ij) / (ni + nj + nk)
                }
            };
            dissimilarity[i * n + k] = merged;
            dissimilarity[k * n + i] = merged;
        }
        sizes[i] += sizes[j];
        let absorbed = core::mem::take(&mut members[j]);
        members[i].extend(absorbed);
        active[j] = false;
    }

    // Number surviving clusters by their smallest original row.
    let mut roots: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    roots.sort_by_key(|&r| *members[r].iter().min().expect("non-empty cluster"));
    let mut labels = vec![0usize; n];
    for (cluster_id, &root) in roots.iter().enumerate() {
        for &row in &members[root] {
            labels[row] = cluster_id;
        }
    }
    Ok(AgglomerativeResult {
        labels,
        n_clusters,
        linkage,
    })
}
