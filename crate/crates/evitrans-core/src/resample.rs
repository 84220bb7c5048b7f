//! Class-balancing strategies for imbalanced binary datasets.
//!
//! Three strategies: SMOTE over-sampling of the minority class, random
//! under-sampling of the majority class, and Wilson's edited nearest
//! neighbor rule (majority side only), plus the SMOTE+ENN composition.
//! Every operation records row provenance so that per-row side data
//! (evidence labels) can be carried through a resampling step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(CoreError::Shape(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Histogram of (class, count), ascending by class id.
    pub fn class_counts(&self) -> Vec<(usize, usize)> {
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for &label in &self.labels {
            match counts.iter_mut().find(|(c, _)| *c == label) {
                Some((_, n)) => *n += 1,
                None => counts.push((label, 1)),
            }
        }
        counts.sort_unstable();
        counts
    }
}

/// Where each output row of a resampling step came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Row index in the input dataset.
    Original(usize),
    /// SMOTE interpolation between two input minority rows.
    Synthetic { base: usize, neighbor: usize },
}

/// A resampled dataset together with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleOutcome {
    pub dataset: LabeledDataset,
    pub provenance: Vec<Provenance>,
}

/// The two classes of a binary dataset, minority first.
struct BinarySplit {
    minority_class: usize,
    minority_rows: Vec<usize>,
    majority_rows: Vec<usize>,
}

fn binary_split(ds: &LabeledDataset) -> Result<BinarySplit> {
    let counts = ds.class_counts();
    if counts.len() != 2 {
        return Err(CoreError::Config(format!(
            "resampling requires exactly two classes, found {}",
            counts.len()
        )));
    }
    // Smaller count wins minority; ties break toward the higher class id
    // (the positive/severe class by convention).
    let (a, b) = (counts[0], counts[1]);
    let (minority_class, majority_class) = if a.1 < b.1 { (a.0, b.0) } else { (b.0, a.0) };
    let minority_rows = (0..ds.len())
        .filter(|&i| ds.labels[i] == minority_class)
        .collect();
    let majority_rows = (0..ds.len())
        .filter(|&i| ds.labels[i] == majority_class)
        .collect();
    Ok(BinarySplit {
        minority_class,
        minority_rows,
        majority_rows,
    })
}

/// Indices of the k nearest rows to `query` among `candidates`,
/// excluding `query` itself; ties break on the lower row index.
fn k_nearest(features: &Matrix, query: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut dists: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != query)
        .map(|&c| (Matrix::row_sq_dist(features, query, features, c), c))
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    dists.into_iter().take(k).map(|(_, c)| c).collect()
}

/// SMOTE: raises the minority class to `target_ratio` times the majority
/// count by interpolating between minority samples and their k nearest
/// minority neighbors. Original rows are kept untouched, synthetic rows are
/// appended.
pub fn smote_oversample(
    ds: &LabeledDataset,
    k_neighbors: usize,
    target_ratio: f64,
    seed: u64,
) -> Result<ResampleOutcome> {
    if k_neighbors == 0 {
        return Err(CoreError::Count("k_neighbors must be at least 1".into()));
    }
    if !(target_ratio > 0.0) {
        return Err(CoreError::Config(format!(
            "target ratio must be positive, got {target_ratio}"
        )));
    }
    let split = binary_split(ds)?;
    if split.minority_rows.len() < k_neighbors + 1 {
        return Err(CoreError::Count(format!(
            "minority class has {} samples, need at least {} for k={}",
            split.minority_rows.len(),
            k_neighbors + 1,
            k_neighbors
        )));
    }
    let target = libm::round(target_ratio * split.majority_rows.len() as f64) as usize;
    let synthetic_count = target.saturating_sub(split.minority_rows.len());

    let mut features = ds.features.clone();
    let mut labels = ds.labels.clone();
    let mut provenance: Vec<Provenance> = (0..ds.len()).map(Provenance::Original).collect();

    let mut rng = Rng::new(seed);
    let mut synthetic = Matrix::zeros(synthetic_count, ds.features.cols());
    for s in 0..synthetic_count {
        let base = split.minority_rows[rng.below(split.minority_rows.len())];
        let neighbors = k_nearest(&ds.features, base, &split.minority_rows, k_neighbors);
        let neighbor = neighbors[rng.below(neighbors.len())];
        let u = rng.uniform();
        for (j, v) in synthetic.row_mut(s).iter_mut().enumerate() {
            let x = ds.features.get(base, j);
            let x_nn = ds.features.get(neighbor, j);
            *v = x + u * (x_nn - x);
        }
        labels.push(split.minority_class);
        provenance.push(Provenance::Synthetic { base, neighbor });
    }
    features = features.vstack(&synthetic)?;
    Ok(ResampleOutcome {
        dataset: LabeledDataset::new(features, labels)?,
        provenance,
    })
}

/// Randomly under-samples the majority class (without replacement) down to
/// `target_ratio` times the minority count. Kept rows preserve their
/// original order; the minority class is untouched.
pub fn random_undersample(
    ds: &LabeledDataset,
    target_ratio: f64,
    seed: u64,
) -> Result<ResampleOutcome> {
    if !(target_ratio > 0.0) {
        return Err(CoreError::Config(format!(
            "target ratio must be positive, got {target_ratio}"
        )));
    }
    let split = binary_split(ds)?;
    let target = libm::round(target_ratio * split.minority_rows.len() as f64) as usize;
    if target > split.majority_rows.len() {
        return Err(CoreError::Count(format!(
            "target {target} majority rows exceed the {} available",
            split.majority_rows.len()
        )));
    }
    let mut rng = Rng::new(seed);
    let picked = rng.sample_indices(split.majority_rows.len(), target);
    let mut keep = vec![false; ds.len()];
    for &i in &split.minority_rows {
        keep[i] = true;
    }
    for &p in &picked {
        keep[split.majority_rows[p]] = true;
    }
    let kept: Vec<usize> = (0..ds.len()).filter(|&i| keep[i]).collect();
    subset_outcome(ds, &kept)
}

/// Wilson's edited nearest neighbor rule, applied to the majority class
/// only: removes every majority row whose label disagrees with the strict
/// majority vote of its k nearest neighbors (Euclidean, over all rows).
pub fn enn_edit(ds: &LabeledDataset, k: usize) -> Result<ResampleOutcome> {
    if k == 0 {
        return Err(CoreError::Count("k must be at least 1".into()));
    }
    if ds.len() < k + 1 {
        return Err(CoreError::Count(format!(
            "need at least {} rows for k={k}, have {}",
            k + 1,
            ds.len()
        )));
    }
    let split = binary_split(ds)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut keep = vec![true; ds.len()];
    for &i in &split.majority_rows {
        let neighbors = k_nearest(&ds.features, i, &all, k);
        let disagreeing = neighbors
            .iter()
            .filter(|&&n| ds.labels[n] != ds.labels[i])
            .count();
        if 2 * disagreeing > k {
            keep[i] = false;
        }
    }
    let kept: Vec<usize> = (0..ds.len()).filter(|&i| keep[i]).collect();
    subset_outcome(ds, &kept)
}

/// SMOTE over-sampling followed by ENN editing.
pub fn smoteenn(
    ds: &LabeledDataset,
    k_neighbors: usize,
    target_ratio: f64,
    enn_k: usize,
    seed: u64,
) -> Result<ResampleOutcome> {
    let oversampled = smote_oversample(ds, k_neighbors, target_ratio, seed)?;
    let edited = enn_edit(&oversampled.dataset, enn_k)?;
    // Compose provenance through the ENN subset.
    let provenance = edited
        .provenance
        .iter()
        .map(|p| match p {
            Provenance::Original(i) => oversampled.provenance[*i],
            Provenance::Synthetic { .. } => unreachable!("ENN only subsets rows"),
        })
        .collect();
    Ok(ResampleOutcome {
        dataset: edited.dataset,
        provenance,
    })
}

fn subset_outcome(ds: &LabeledDataset, kept: &[usize]) -> Result<ResampleOutcome> {
    let features = ds.features.select_rows(kept)?;
    let labels = kept.iter().map(|&i| ds.labels[i]).collect();
    Ok(ResampleOutcome {
        dataset: LabeledDataset::new(features, labels)?,
        provenance: kept.iter().map(|&i| Provenance::Original(i)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    /// Planted binary dataset: `majority` rows near 0, `minority` near 1.
    fn planted(majority: usize, minority: usize, dim: usize, seed: u64) -> LabeledDataset {
        let mut rng = Rng::new(seed);
        let n = majority + minority;
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let (center, label) = if i < majority { (0.2, 0) } else { (0.8, 1) };
            labels.push(label);
            for _ in 0..dim {
                data.push(rng.normal_scaled(center, 0.04));
            }
        }
        LabeledDataset::new(Matrix::from_vec(n, dim, data).unwrap(), labels).unwrap()
    }

    #[test]
    fn smote_reaches_the_target_count() {
        let ds = planted(500, 50, 3, 1);
        let out = smote_oversample(&ds, 5, 1.0, 7).unwrap();
        let counts = out.dataset.class_counts();
        assert_eq!(counts, vec![(0, 500), (1, 500)]);
        // Original rows are bitwise untouched, in order.
        for i in 0..ds.len() {
            assert_eq!(out.dataset.features.row(i), ds.features.row(i));
            assert_eq!(out.provenance[i], Provenance::Original(i));
        }
    }

    #[test]
    fn smote_points_lie_on_minority_segments() {
        let ds = planted(60, 12, 4, 2);
        let out = smote_oversample(&ds, 3, 1.0, 9).unwrap();
        for (row, p) in out.provenance.iter().enumerate().skip(ds.len()) {
            let Provenance::Synthetic { base, neighbor } = p else {
                panic!("appended row {row} is not synthetic");
            };
            assert_eq!(ds.labels[*base], 1);
            assert_eq!(ds.labels[*neighbor], 1);
            // s = x + u (x_nn - x) for a single u across coordinates.
            let mut u_seen: Option<f64> = None;
            for j in 0..ds.features.cols() {
                let x = ds.features.get(*base, j);
                let x_nn = ds.features.get(*neighbor, j);
                let s = out.dataset.features.get(row, j);
                if (x_nn - x).abs() > 1e-12 {
                    let u = (s - x) / (x_nn - x);
                    assert!((-1e-9..=1.0 + 1e-9).contains(&u), "u = {u}");
                    if let Some(prev) = u_seen {
                        assert!((u - prev).abs() < 1e-9);
                    }
                    u_seen = Some(u);
                } else {
                    assert!((s - x).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn smote_on_identical_minority_pair_reproduces_the_point() {
        let features = Matrix::from_vec(
            5,
            2,
            vec![0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 0.7, 0.7, 0.7, 0.7],
        )
        .unwrap();
        let ds = LabeledDataset::new(features, vec![0, 0, 0, 1, 1]).unwrap();
        let out = smote_oversample(&ds, 1, 1.0, 3).unwrap();
        for p in out.provenance.iter().skip(5) {
            assert!(matches!(p, Provenance::Synthetic { .. }));
        }
        for row in 5..out.dataset.len() {
            assert_eq!(out.dataset.features.row(row), &[0.7, 0.7]);
        }
    }

    #[test]
    fn smote_rejects_too_small_minority() {
        let ds = planted(20, 3, 2, 3);
        assert!(matches!(
            smote_oversample(&ds, 5, 1.0, 1),
            Err(CoreError::Count(_))
        ));
    }

    #[test]
    fn undersample_balances_exactly() {
        // Mirror of the real catalog scale: 57584 total, 3136 severe.
        let ds = planted(800, 64, 2, 4);
        let out = random_undersample(&ds, 1.0, 5).unwrap();
        assert_eq!(out.dataset.class_counts(), vec![(0, 64), (1, 64)]);
        // Output rows are a subset of input rows, in original order.
        let mut last = None;
        for p in &out.provenance {
            let Provenance::Original(i) = p else {
                panic!("fabricated row");
            };
            if let Some(prev) = last {
                assert!(*i > prev);
            }
            last = Some(*i);
        }
    }

    #[test]
    fn undersample_on_balanced_data_is_identity() {
        let ds = planted(30, 30, 2, 6);
        let out = random_undersample(&ds, 1.0, 7).unwrap();
        assert_eq!(out.dataset, ds);
    }

    #[test]
    fn undersample_is_deterministic_per_seed() {
        let ds = planted(100, 20, 2, 8);
        let a = random_undersample(&ds, 1.0, 11).unwrap();
        let b = random_undersample(&ds, 1.0, 11).unwrap();
        assert_eq!(a, b);
        let c = random_undersample(&ds, 1.0, 12).unwrap();
        assert_ne!(a.provenance, c.provenance);
    }

    #[test]
    fn undersample_target_beyond_available_errors() {
        let ds = planted(10, 8, 2, 9);
        assert!(matches!(
            random_undersample(&ds, 2.0, 1),
            Err(CoreError::Count(_))
        ));
    }

    #[test]
    fn enn_keeps_separated_blobs_intact() {
        let ds = planted(40, 20, 3, 10);
        let out = enn_edit(&ds, 3).unwrap();
        assert_eq!(out.dataset, ds);
    }

    #[test]
    fn enn_removes_a_planted_majority_intruder() {
        // One majority point dropped deep inside the minority blob.
        let mut ds = planted(40, 20, 3, 11);
        for v in ds.features.row_mut(0) {
            *v = 0.8;
        }
        let out = enn_edit(&ds, 3).unwrap();
        assert_eq!(out.dataset.len(), ds.len() - 1);
        assert!(!out.provenance.contains(&Provenance::Original(0)));
        // Minority rows are never removed.
        let minority_kept = out.dataset.labels.iter().filter(|&&l| l == 1).count();
        assert_eq!(minority_kept, 20);
    }

    #[test]
    fn enn_with_k1_is_nearest_neighbor_disagreement() {
        let mut ds = planted(30, 15, 2, 12);
        for v in ds.features.row_mut(3) {
            *v = 0.8;
        }
        let out = enn_edit(&ds, 1).unwrap();
        // Direct 1-NN rule: majority row removed iff its nearest neighbor
        // has a different label.
        let all: Vec<usize> = (0..ds.len()).collect();
        let mut expected: Vec<usize> = Vec::new();
        for i in 0..ds.len() {
            if ds.labels[i] == 0 {
                let nn = k_nearest(&ds.features, i, &all, 1)[0];
                if ds.labels[nn] != ds.labels[i] {
                    continue;
                }
            }
            expected.push(i);
        }
        let kept: Vec<usize> = out
            .provenance
            .iter()
            .map(|p| match p {
                Provenance::Original(i) => *i,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(kept, expected);
    }

    #[test]
    fn enn_rejects_k_at_or_beyond_row_count() {
        let ds = planted(3, 2, 2, 13);
        assert!(matches!(enn_edit(&ds, 5), Err(CoreError::Count(_))));
        assert!(enn_edit(&ds, 4).is_ok());
    }

    #[test]
    fn smoteenn_equals_smote_when_enn_finds_no_disagreements() {
        let ds = planted(60, 12, 3, 14);
        let smote_only = smote_oversample(&ds, 3, 1.0, 15).unwrap();
        let combined = smoteenn(&ds, 3, 1.0, 3, 15).unwrap();
        assert_eq!(combined.dataset, smote_only.dataset);
        assert_eq!(combined.provenance, smote_only.provenance);
    }

    #[test]
    fn smoteenn_drops_the_planted_intruder_that_smote_kept() {
        let mut ds = planted(60, 12, 3, 16);
        for v in ds.features.row_mut(1) {
            *v = 0.8;
        }
        let smote_only = smote_oversample(&ds, 3, 1.0, 17).unwrap();
        assert!(smote_only.provenance.contains(&Provenance::Original(1)));
        let combined = smoteenn(&ds, 3, 1.0, 3, 17).unwrap();
        assert!(!combined.provenance.contains(&Provenance::Original(1)));
    }

    #[test]
    fn smoteenn_is_deterministic_per_seed() {
        let ds = planted(50, 10, 3, 18);
        let a = smoteenn(&ds, 3, 1.0, 3, 19).unwrap();
        let b = smoteenn(&ds, 3, 1.0, 3, 19).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn more_than_two_classes_is_rejected() {
        let features = Matrix::from_fn(6, 2, |i, _| i as f64);
        let ds = LabeledDataset::new(features, vec![0, 0, 1, 1, 2, 2]).unwrap();
        assert!(matches!(
            random_undersample(&ds, 1.0, 1),
            Err(CoreError::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn undersample_output_is_a_row_subset(seed in 0u64..200) {
            let ds = planted(40, 10, 2, seed);
            let out = random_undersample(&ds, 1.0, seed.wrapping_add(1)).unwrap();
            for (row, p) in out.provenance.iter().enumerate() {
                let Provenance::Original(i) = p else { panic!("fabricated row") };
                prop_assert_eq!(out.dataset.features.row(row), ds.features.row(*i));
                prop_assert_eq!(out.dataset.labels[row], ds.labels[*i]);
            }
        }

        #[test]
        fn resampling_preserves_feature_dimension(seed in 0u64..100) {
            let ds = planted(30, 10, 3, seed);
            let a = smote_oversample(&ds, 3, 1.0, seed).unwrap();
            let b = random_undersample(&ds, 1.0, seed).unwrap();
            let c = enn_edit(&ds, 3).unwrap();
            prop_assert_eq!(a.dataset.features.cols(), 3);
            prop_assert_eq!(b.dataset.features.cols(), 3);
            prop_assert_eq!(c.dataset.features.cols(), 3);
        }
    }
}
