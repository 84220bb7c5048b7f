//! Date-to-sample label expansion and rotation-experiment construction.

use std::collections::BTreeSet;

use evitrans_core::model::{one_hot, EvidenceSet};
use evitrans_core::resample::LabeledDataset;
use evitrans_core::rng::Rng;

use crate::dataio::catalog::{epoch_day_to_iso, EventCatalog, EventType};
use crate::dataio::features::FeatureMatrix;
use crate::error::{AppError, Result};

/// Per-sample binary labels plus warnings about out-of-coverage event days.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedLabels {
    pub labels: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Marks every 6-hour sample whose calendar day carries an event of the
/// given type. A fully covered event day yields exactly four positive
/// samples; duplicate (date, type) pairs collapse.
pub fn expand_event_labels(
    catalog: &EventCatalog,
    fm: &FeatureMatrix,
    event_type: EventType,
) -> ExpandedLabels {
    let days = catalog.days_of_type(event_type);
    expand_days(&days, fm, &format!("{event_type} event"))
}

/// Binary labels marking samples on any severe day of any type (the
/// combined single-class task).
pub fn expand_combined_labels(catalog: &EventCatalog, fm: &FeatureMatrix) -> ExpandedLabels {
    let days = catalog.all_severe_days();
    expand_days(&days, fm, "severe event")
}

fn expand_days(days: &BTreeSet<i64>, fm: &FeatureMatrix, what: &str) -> ExpandedLabels {
    let first_day = fm.epoch_day(0);
    let last_day = fm.epoch_day(fm.rows() - 1);
    let warnings = days
        .iter()
        .filter(|&&d| d < first_day || d > last_day)
        .map(|&d| {
            format!(
                "{what} on {} lies outside feature coverage {}..{}",
                epoch_day_to_iso(d),
                epoch_day_to_iso(first_day),
                epoch_day_to_iso(last_day)
            )
        })
        .collect();
    let labels = (0..fm.rows())
        .map(|i| usize::from(days.contains(&fm.epoch_day(i))))
        .collect();
    ExpandedLabels { labels, warnings }
}

/// Ground truth / evidence role assignment for one rotation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSpec {
    pub ground_truth_type: EventType,
    pub evidence_types: Vec<EventType>,
    /// Non-severe pool size after random under-sampling.
    pub nonsevere_sample_target: usize,
    pub seed: u64,
}

impl RotationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.evidence_types.is_empty() {
            return Err(AppError::Config(
                "rotation needs at least one evidence type".into(),
            ));
        }
        if self.evidence_types.contains(&self.ground_truth_type) {
            return Err(AppError::Config(format!(
                "ground truth type {} cannot also serve as evidence",
                self.ground_truth_type
            )));
        }
        for (i, t) in self.evidence_types.iter().enumerate() {
            if self.evidence_types[..i].contains(t) {
                return Err(AppError::Config(format!("duplicate evidence type {t}")));
            }
        }
        Ok(())
    }
}

/// A rotation cell: selected samples, binary ground truth, and one binary
/// evidence source per evidence type.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationExperiment {
    pub dataset: LabeledDataset,
    pub evidence: EvidenceSet,
    /// Original feature-matrix rows behind each dataset row.
    pub selected_rows: Vec<usize>,
}

/// Builds the rotation dataset: ground-truth samples, evidence samples and
/// a seeded random draw of non-severe samples. Ground truth marks only its
/// own event type as positive; each evidence source marks only its own.
pub fn build_rotation_experiment(
    fm: &FeatureMatrix,
    catalog: &EventCatalog,
    spec: &RotationSpec,
) -> Result<RotationExperiment> {
    spec.validate()?;
    let gt_days = catalog.days_of_type(spec.ground_truth_type);
    if gt_days.is_empty() {
        return Err(AppError::Config(format!(
            "ground-truth type {} is absent from the catalog",
            spec.ground_truth_type
        )));
    }
    let mut evidence_days = Vec::new();
    for t in &spec.evidence_types {
        let days = catalog.days_of_type(*t);
        if days.is_empty() {
            return Err(AppError::Config(format!(
                "evidence type {t} is absent from the catalog"
            )));
        }
        evidence_days.push(days);
    }
    let severe_days = catalog.all_severe_days();

    let mut selected = BTreeSet::new();
    let mut nonsevere_pool = Vec::new();
    for i in 0..fm.rows() {
        let day = fm.epoch_day(i);
        if gt_days.contains(&day) || evidence_days.iter().any(|d| d.contains(&day)) {
            selected.insert(i);
        } else if !severe_days.contains(&day) {
            nonsevere_pool.push(i);
        }
    }
    if nonsevere_pool.len() < spec.nonsevere_sample_target {
        return Err(AppError::Data(format!(
            "only {} non-severe samples available, {} requested",
            nonsevere_pool.len(),
            spec.nonsevere_sample_target
        )));
    }
    let mut rng = Rng::new(spec.seed);
    for p in rng.sample_indices(nonsevere_pool.len(), spec.nonsevere_sample_target) {
        selected.insert(nonsevere_pool[p]);
    }
    let selected_rows: Vec<usize> = selected.into_iter().collect();

    let labels: Vec<usize> = selected_rows
        .iter()
        .map(|&i| usize::from(gt_days.contains(&fm.epoch_day(i))))
        .collect();
    if !labels.contains(&1) || !labels.contains(&0) {
        return Err(AppError::Data(
            "rotation ground truth collapsed to a single class".into(),
        ));
    }

    let mut names = Vec::new();
    let mut sources = Vec::new();
    for (t, days) in spec.evidence_types.iter().zip(&evidence_days) {
        let marks: Vec<usize> = selected_rows
            .iter()
            .map(|&i| usize::from(days.contains(&fm.epoch_day(i))))
            .collect();
        names.push(t.name().to_string());
        sources.push(one_hot(&marks, 2)?);
    }
    let features = fm.normalized().select_rows(&selected_rows)?;
    Ok(RotationExperiment {
        dataset: LabeledDataset::new(features, labels)?,
        evidence: EvidenceSet::new(names, sources)?,
        selected_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::catalog::{iso_to_epoch_day, EventRecord};
    use evitrans_core::Matrix;

    /// Feature matrix covering `days` whole days from the given date.
    fn grid(days: usize, start_iso: &str) -> FeatureMatrix {
        let start_day = iso_to_epoch_day(start_iso).unwrap();
        let rows = days * 4;
        let raw = Matrix::from_fn(rows, 3, |i, j| (i * 3 + j) as f64);
        FeatureMatrix::new(raw, start_day * 86_400, 21_600).unwrap()
    }

    fn record(event_type: EventType, dates: &[&str]) -> EventRecord {
        EventRecord {
            name: format!("{event_type} test event"),
            event_type,
            affected_countries: vec!["Synthetica".into()],
            location: None,
            latitude: 40.0,
            longitude: 20.0,
            description: "test".into(),
            dates: dates.iter().map(|d| iso_to_epoch_day(d).unwrap()).collect(),
        }
    }

    #[test]
    fn one_covered_event_day_yields_exactly_four_positives() {
        let fm = grid(10, "2001-05-01");
        let catalog =
            EventCatalog::new(vec![record(EventType::Flood, &["2001-05-03"])]).unwrap();
        let expanded = expand_event_labels(&catalog, &fm, EventType::Flood);
        assert_eq!(expanded.labels.iter().sum::<usize>(), 4);
        assert!(expanded.warnings.is_empty());
        // The four positives are the four samples of that day.
        for (i, &l) in expanded.labels.iter().enumerate() {
            assert_eq!(l == 1, fm.epoch_day(i) == iso_to_epoch_day("2001-05-03").unwrap());
        }
    }

    #[test]
    fn empty_catalog_yields_all_zero_labels() {
        let fm = grid(5, "2001-05-01");
        let catalog = EventCatalog::default();
        let expanded = expand_event_labels(&catalog, &fm, EventType::Tornado);
        assert!(expanded.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn overlapping_events_still_yield_four_positives_per_day() {
        let fm = grid(6, "2001-05-01");
        let catalog = EventCatalog::new(vec![
            record(EventType::Flood, &["2001-05-02"]),
            record(EventType::Flood, &["2001-05-02"]),
        ])
        .unwrap();
        let expanded = expand_event_labels(&catalog, &fm, EventType::Flood);
        assert_eq!(expanded.labels.iter().sum::<usize>(), 4);
    }

    #[test]
    fn out_of_coverage_dates_warn_but_do_not_fail() {
        let fm = grid(4, "2001-05-01");
        let catalog = EventCatalog::new(vec![record(
            EventType::Flood,
            &["2001-05-02", "2015-01-01"],
        )])
        .unwrap();
        let expanded = expand_event_labels(&catalog, &fm, EventType::Flood);
        assert_eq!(expanded.labels.iter().sum::<usize>(), 4);
        assert_eq!(expanded.warnings.len(), 1);
        assert!(expanded.warnings[0].contains("2015-01-01"));
    }

    fn rotation_fixture() -> (FeatureMatrix, EventCatalog) {
        let fm = grid(40, "2002-01-01");
        let catalog = EventCatalog::new(vec![
            record(EventType::Windstorm, &["2002-01-03", "2002-01-10"]),
            record(EventType::Flood, &["2002-01-05", "2002-01-20", "2002-01-21"]),
            record(EventType::Tornado, &["2002-01-30"]),
        ])
        .unwrap();
        (fm, catalog)
    }

    #[test]
    fn rotation_selects_gt_evidence_and_nonsevere_samples() {
        let (fm, catalog) = rotation_fixture();
        let spec = RotationSpec {
            ground_truth_type: EventType::Windstorm,
            evidence_types: vec![EventType::Flood],
            nonsevere_sample_target: 20,
            seed: 5,
        };
        let experiment = build_rotation_experiment(&fm, &catalog, &spec).unwrap();
        // 2 windstorm days * 4 + 3 flood days * 4 + 20 non-severe.
        assert_eq!(experiment.dataset.len(), 8 + 12 + 20);
        assert_eq!(experiment.dataset.labels.iter().sum::<usize>(), 8);
        // Evidence marks exactly the flood rows, disjoint from ground truth.
        let flood_marks: Vec<usize> = (0..experiment.dataset.len())
            .map(|i| experiment.evidence.sources()[0].get(i, 1) as usize)
            .collect();
        assert_eq!(flood_marks.iter().sum::<usize>(), 12);
        for i in 0..experiment.dataset.len() {
            assert!(
                !(experiment.dataset.labels[i] == 1 && flood_marks[i] == 1),
                "row {i} is both ground truth and evidence despite disjoint dates"
            );
        }
        // Tornado day samples are excluded entirely.
        let tornado_day = iso_to_epoch_day("2002-01-30").unwrap();
        assert!(experiment
            .selected_rows
            .iter()
            .all(|&r| fm.epoch_day(r) != tornado_day));
    }

    #[test]
    fn rotation_is_deterministic_per_seed() {
        let (fm, catalog) = rotation_fixture();
        let spec = RotationSpec {
            ground_truth_type: EventType::Flood,
            evidence_types: vec![EventType::Windstorm],
            nonsevere_sample_target: 15,
            seed: 9,
        };
        let a = build_rotation_experiment(&fm, &catalog, &spec).unwrap();
        let b = build_rotation_experiment(&fm, &catalog, &spec).unwrap();
        assert_eq!(a, b);
        let different = build_rotation_experiment(
            &fm,
            &catalog,
            &RotationSpec {
                seed: 10,
                ..spec.clone()
            },
        )
        .unwrap();
        assert_ne!(a.selected_rows, different.selected_rows);
    }

    #[test]
    fn rotation_rejects_missing_ground_truth_type() {
        let (fm, catalog) = rotation_fixture();
        let spec = RotationSpec {
            ground_truth_type: EventType::Hailstorm,
            evidence_types: vec![EventType::Flood],
            nonsevere_sample_target: 10,
            seed: 1,
        };
        assert!(matches!(
            build_rotation_experiment(&fm, &catalog, &spec),
            Err(AppError::Config(_))
        ));
    }

    #[test]
    fn rotation_rejects_gt_in_evidence_and_empty_evidence() {
        let spec = RotationSpec {
            ground_truth_type: EventType::Flood,
            evidence_types: vec![EventType::Flood],
            nonsevere_sample_target: 10,
            seed: 1,
        };
        assert!(spec.validate().is_err());
        let spec = RotationSpec {
            ground_truth_type: EventType::Flood,
            evidence_types: vec![],
            nonsevere_sample_target: 10,
            seed: 1,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rotation_partition_property_on_disjoint_dates() {
        let (fm, catalog) = rotation_fixture();
        let spec = RotationSpec {
            ground_truth_type: EventType::Windstorm,
            evidence_types: vec![EventType::Flood, EventType::Tornado],
            nonsevere_sample_target: 25,
            seed: 3,
        };
        let experiment = build_rotation_experiment(&fm, &catalog, &spec).unwrap();
        // Every selected row is exactly one of: ground truth, one evidence
        // type, or non-severe.
        for i in 0..experiment.dataset.len() {
            let gt = experiment.dataset.labels[i];
            let ev: usize = experiment
                .evidence
                .sources()
                .iter()
                .map(|s| s.get(i, 1) as usize)
                .sum();
            assert!(gt + ev <= 1, "row {i} has overlapping roles");
        }
        let gt_count: usize = experiment.dataset.labels.iter().sum();
        let ev_count: usize = experiment
            .evidence
            .sources()
            .iter()
            .map(|s| (0..s.rows()).map(|i| s.get(i, 1) as usize).sum::<usize>())
            .sum();
        assert_eq!(
            gt_count + ev_count + 25,
            experiment.dataset.len(),
            "roles do not partition the dataset"
        );
    }
}
