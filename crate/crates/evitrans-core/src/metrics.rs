//! Cluster-to-label alignment and precision/recall/F1 reporting.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Largest cluster/label cardinality for exact bijection search.
const MAX_BIJECTION: usize = 8;

/// Best bijection from cluster ids to label ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMapping {
    /// `assignment[cluster] = label`.
    pub assignment: Vec<usize>,
    /// Predictions relabeled through the assignment.
    pub relabeled: Vec<usize>,
    pub accuracy: f64,
}

/// Selects the cluster-to-label bijection that maximizes accuracy.
/// Ties resolve to the lexicographically smallest assignment, so cluster 0
/// prefers label 0.
pub fn map_clusters_to_labels(cluster_ids: &[usize], true_labels: &[usize]) -> Result<ClusterMapping> {
    if cluster_ids.len() != true_labels.len() {
        return Err(CoreError::Shape(format!(
            "{} cluster ids for {} labels",
            cluster_ids.len(),
            true_labels.len()
        )));
    }
    if cluster_ids.is_empty() {
        return Err(CoreError::Count("empty prediction vector".into()));
    }
    let k_clusters = cluster_ids.iter().max().expect("non-empty") + 1;
    let k_labels = true_labels.iter().max().expect("non-empty") + 1;
    if k_clusters != k_labels {
        return Err(CoreError::Mapping(format!(
            "{k_clusters} cluster ids cannot be put in bijection with {k_labels} labels"
        )));
    }
    if k_clusters > MAX_BIJECTION {
        return Err(CoreError::Mapping(format!(
            "bijection search supports up to {MAX_BIJECTION} classes, got {k_clusters}"
        )));
    }

    // Contingency counts, then exact search over all bijections in
    // lexicographic order (first maximizer wins).
    let mut counts = vec![0usize; k_clusters * k_labels];
    for (&c, &l) in cluster_ids.iter().zip(true_labels) {
        counts[c * k_labels + l] += 1;
    }
    let mut best_assignment: Option<Vec<usize>> = None;
    let mut best_correct = 0usize;
    let mut prefix = Vec::with_capacity(k_clusters);
    let mut remaining: Vec<usize> = (0..k_clusters).collect();
    visit_permutations(&mut prefix, &mut remaining, &mut |candidate| {
        let correct: usize = candidate
            .iter()
            .enumerate()
            .map(|(cluster, &label)| counts[cluster * k_labels + label])
            .sum();
        if best_assignment.is_none() || correct > best_correct {
            best_correct = correct;
            best_assignment = Some(candidate.to_vec());
        }
    });
    let assignment = best_assignment.expect("at least one permutation");
    let relabeled = cluster_ids.iter().map(|&c| assignment[c]).collect();
    Ok(ClusterMapping {
        accuracy: best_correct as f64 / cluster_ids.len() as f64,
        assignment,
        relabeled,
    })
}

/// Visits all permutations in lexicographic order. `remaining` must be
/// sorted ascending on entry.
fn visit_permutations(
    prefix: &mut Vec<usize>,
    remaining: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if remaining.is_empty() {
        visit(prefix);
        return;
    }
    for i in 0..remaining.len() {
        let value = remaining.remove(i);
        prefix.push(value);
        visit_permutations(prefix, remaining, visit);
        prefix.pop();
        remaining.insert(i, value);
    }
}

/// Precision, recall and F1; `degenerate` marks a zero denominator that was
/// reported as 0 instead of failing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

/// Binary confusion counts for a designated positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

pub fn confusion(predictions: &[usize], true_labels: &[usize], positive: usize) -> ConfusionCounts {
    let mut c = ConfusionCounts {
        true_positive: 0,
        false_positive: 0,
        false_negative: 0,
        true_negative: 0,
    };
    for (&p, &t) in predictions.iter().zip(true_labels) {
        match (p == positive, t == positive) {
            (true, true) => c.true_positive += 1,
            (true, false) => c.false_positive += 1,
            (false, true) => c.false_negative += 1,
            (false, false) => c.true_negative += 1,
        }
    }
    c
}

/// Precision/recall/F1 for one positive class. Zero denominators yield 0
/// with the degenerate flag set.
pub fn prf1(predictions: &[usize], true_labels: &[usize], positive: usize) -> Result<Prf1> {
    if predictions.len() != true_labels.len() {
        return Err(CoreError::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            true_labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(CoreError::Count("empty prediction vector".into()));
    }
    let c = confusion(predictions, true_labels, positive);
    Ok(prf1_from_counts(
        c.true_positive,
        c.false_positive,
        c.false_negative,
    ))
}

fn prf1_from_counts(tp: usize, fp: usize, fn_: usize) -> Prf1 {
    let mut degenerate = false;
    let precision = if tp + fp == 0 {
        degenerate = true;
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        degenerate = true;
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    // Count form of 2PR/(P+R); exactly equals precision when fp == fn,
    // which makes the micro identity hold bitwise.
    let f1 = if 2 * tp + fp + fn_ == 0 {
        degenerate = true;
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Prf1 {
        precision,
        recall,
        f1,
        degenerate,
    }
}

/// Micro-averaged precision/recall/F1 from pooled per-class confusion
/// counts. Under single-label full coverage all three equal accuracy.
pub fn micro_prf1(predictions: &[usize], true_labels: &[usize]) -> Result<Prf1> {
    if predictions.len() != true_labels.len() {
        return Err(CoreError::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            true_labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(CoreError::Count("empty prediction vector".into()));
    }
    let classes = predictions
        .iter()
        .chain(true_labels)
        .max()
        .expect("non-empty")
        + 1;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for class in 0..classes {
        let c = confusion(predictions, true_labels, class);
        tp += c.true_positive;
        fp += c.false_positive;
        fn_ += c.false_negative;
    }
    Ok(prf1_from_counts(tp, fp, fn_))
}

/// Experiment metadata carried inside a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMetadata {
    pub seed: u64,
    pub config_hash: String,
}

/// Full scoring of one detector run against binary ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    /// `(label, metrics)` per class, ascending; the anomalous class is 1.
    pub per_class: Vec<(usize, Prf1)>,
    pub micro: Prf1,
    /// Confusion counts for the anomalous class.
    pub confusion: ConfusionCounts,
    /// Cluster-to-label assignment used for scoring.
    pub mapping: Vec<usize>,
    pub metadata: ReportMetadata,
}

impl DetectionReport {
    /// Aligns raw cluster ids with binary ground truth and scores them.
    pub fn from_clusters(
        cluster_ids: &[usize],
        true_labels: &[usize],
        metadata: ReportMetadata,
    ) -> Result<Self> {
        if true_labels.iter().any(|&l| l > 1) {
            return Err(CoreError::Mapping(
                "detection reports expect binary ground truth".into(),
            ));
        }
        let mapping = map_clusters_to_labels(cluster_ids, true_labels)?;
        let per_class = vec![
            (0usize, prf1(&mapping.relabeled, true_labels, 0)?),
            (1usize, prf1(&mapping.relabeled, true_labels, 1)?),
        ];
        let micro = micro_prf1(&mapping.relabeled, true_labels)?;
        let confusion = confusion(&mapping.relabeled, true_labels, 1);
        Ok(Self {
            per_class,
            micro,
            confusion,
            mapping: mapping.assignment,
            metadata,
        })
    }

    /// Metrics for the anomalous class.
    pub fn anomalous(&self) -> Prf1 {
        self.per_class[1].1
    }
}
