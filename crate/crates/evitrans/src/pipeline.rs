//! End-to-end experiment orchestration.
//!
//! A run stages data, balances classes, trains the initialization step,
//! screens evidence, trains the transfer step, applies the configured
//! detector to both the initial and the transferred latents, and scores
//! both arms against the ground truth. All randomness derives from the
//! master seed through fixed stream tags, so a (config, seed) pair fully
//! determines every emitted byte. Output files are rendered in memory and
//! only written once the whole run has succeeded.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use evitrans_core::detect::{agglomerative_fit, KMeansModel, OcsvmConfig, OcsvmModel};
use evitrans_core::loss::TransferConfig;
use evitrans_core::metrics::{DetectionReport, ReportMetadata};
use evitrans_core::model::{AutoencoderConfig, AutoencoderModel, EvidenceSet};
use evitrans_core::resample::{
    random_undersample, smote_oversample, smoteenn, LabeledDataset, Provenance,
};
use evitrans_core::rng::{derive_seed, Rng};
use evitrans_core::train::{screen_evidence, train_init, train_transfer, ScreeningVerdict};
use evitrans_core::Matrix;

use crate::checkpoint::model_to_bytes;
use crate::config::{
    DataConfig, DetectorKind, ExperimentConfig, SamplingStrategy, TaskConfig,
};
use crate::config::EvaluationMode;
use crate::dataio::catalog::EventCatalog;
use crate::dataio::features::FeatureMatrix;
use crate::dataio::labels::{build_rotation_experiment, expand_combined_labels, RotationSpec};
use crate::dataio::projection::render_projection;
use crate::dataio::synth::synth_generate;
use crate::error::{AppError, Result};
use crate::report::{render_report, RunReport};

// Stream tags for seed derivation; fixed so reports are reproducible.
const TAG_SYNTH: u64 = 1;
const TAG_TASK: u64 = 2;
const TAG_SAMPLING: u64 = 3;
const TAG_MODEL: u64 = 4;
const TAG_INIT: u64 = 5;
const TAG_SCREEN: u64 = 6;
const TAG_HEADS: u64 = 7;
const TAG_TRANSFER: u64 = 8;
const TAG_DETECT: u64 = 9;
const TAG_SPLIT: u64 = 10;

pub const GROUND_TRUTH_EVIDENCE_WARNING: &str =
    "ground-truth-as-evidence protocol: evidence replicates the primary task labels";

/// One finished pipeline run with its renderable outputs.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: RunReport,
    /// Relative path and content for every file the run emits.
    pub files: Vec<(String, Vec<u8>)>,
    /// Initialization-step model (the baseline arm).
    pub baseline_model: AutoencoderModel,
    /// Model after the transfer step, heads attached.
    pub transfer_model: AutoencoderModel,
    /// Task dataset after sampling; rows align with `eval_rows` indices.
    pub dataset: LabeledDataset,
    /// Dataset rows the metrics were computed on.
    pub eval_rows: Vec<usize>,
}

/// A suite of runs (rotation pairs or sampling strategies).
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub cells: Vec<SuiteCell>,
    pub files: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Clone)]
pub struct SuiteCell {
    pub label: String,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

fn at_stage(stage: &str, e: AppError) -> AppError {
    let message = format!("stage {stage}: {e}");
    match e.exit_code() {
        2 => AppError::Config(message),
        4 => AppError::Numeric(message),
        _ => AppError::Data(message),
    }
}

/// Loads or generates the feature matrix and catalog.
pub fn materialize_data(cfg: &ExperimentConfig) -> Result<(FeatureMatrix, EventCatalog)> {
    match &cfg.data {
        DataConfig::Files { features, catalog } => {
            let fm = FeatureMatrix::load(Path::new(features))?;
            let cat = EventCatalog::load(Path::new(catalog))?;
            Ok((fm, cat))
        }
        DataConfig::Synth { synth } => synth_generate(synth, derive_seed(cfg.seed, TAG_SYNTH)),
    }
}

struct StagedTask {
    dataset: LabeledDataset,
    /// Rotation evidence; ground-truth-as-evidence builds its source after
    /// sampling instead.
    evidence: Option<EvidenceSet>,
    warning: Option<String>,
}

fn build_task(
    cfg: &ExperimentConfig,
    fm: &FeatureMatrix,
    catalog: &EventCatalog,
) -> Result<StagedTask> {
    match &cfg.task {
        TaskConfig::Rotation {
            ground_truth,
            evidence,
            nonsevere_samples,
        } => {
            let spec = RotationSpec {
                ground_truth_type: *ground_truth,
                evidence_types: evidence.clone(),
                nonsevere_sample_target: *nonsevere_samples,
                seed: derive_seed(cfg.seed, TAG_TASK),
            };
            let experiment = build_rotation_experiment(fm, catalog, &spec)?;
            Ok(StagedTask {
                dataset: experiment.dataset,
                evidence: Some(experiment.evidence),
                warning: None,
            })
        }
        TaskConfig::GroundTruthAsEvidence => {
            let expanded = expand_combined_labels(catalog, fm);
            let dataset = LabeledDataset::new(fm.normalized().clone(), expanded.labels)?;
            if dataset.class_counts().len() != 2 {
                return Err(AppError::Data(
                    "combined severe labels collapsed to a single class".into(),
                ));
            }
            Ok(StagedTask {
                dataset,
                evidence: None,
                warning: Some(GROUND_TRUTH_EVIDENCE_WARNING.into()),
            })
        }
    }
}

fn apply_sampling(
    cfg: &ExperimentConfig,
    dataset: LabeledDataset,
    evidence: Option<EvidenceSet>,
) -> Result<(LabeledDataset, Option<EvidenceSet>)> {
    let seed = derive_seed(cfg.seed, TAG_SAMPLING);
    let s = &cfg.sampling;
    let outcome = match s.strategy {
        SamplingStrategy::None => return Ok((dataset, evidence)),
        SamplingStrategy::Oversample => {
            smote_oversample(&dataset, s.smote_k, s.target_ratio, seed)?
        }
        SamplingStrategy::Undersample => random_undersample(&dataset, s.target_ratio, seed)?,
        SamplingStrategy::Combine => {
            smoteenn(&dataset, s.smote_k, s.target_ratio, s.enn_k, seed)?
        }
    };
    // Carry evidence through the resampling: synthetic rows inherit the
    // evidence of their interpolation base.
    let evidence = match evidence {
        None => None,
        Some(ev) => {
            let rows: Vec<usize> = outcome
                .provenance
                .iter()
                .map(|p| match p {
                    Provenance::Original(i) => *i,
                    Provenance::Synthetic { base, .. } => *base,
                })
                .collect();
            Some(ev.select_rows(&rows)?)
        }
    };
    Ok((outcome.dataset, evidence))
}

fn detect_clusters(
    cfg: &ExperimentConfig,
    all_latents: &Matrix,
    eval_rows: &[usize],
    seed: u64,
) -> Result<Vec<usize>> {
    let d = &cfg.detector;
    match d.kind {
        DetectorKind::Kmeans => {
            let model = KMeansModel::fit(all_latents, 2, seed, d.kmeans_n_init)?;
            let eval = all_latents.select_rows(eval_rows)?;
            Ok(model.predict(&eval)?)
        }
        DetectorKind::Agglo => {
            let result = agglomerative_fit(all_latents, 2, d.linkage.into())?;
            Ok(eval_rows.iter().map(|&i| result.labels[i]).collect())
        }
        DetectorKind::Ocsvm => {
            let model = OcsvmModel::fit(all_latents, d.nu, &OcsvmConfig::default())?;
            let eval = all_latents.select_rows(eval_rows)?;
            let scored = model.score(&eval)?;
            Ok(scored.flags.iter().map(|&f| usize::from(f)).collect())
        }
    }
}

/// Runs the full pipeline for one configuration.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let (fm, catalog) = materialize_data(cfg).map_err(|e| at_stage("data", e))?;
    run_pipeline_on(cfg, &fm, &catalog, "run")
}

/// Pipeline on pre-materialized data (suites reuse the same data across
/// cells).
pub fn run_pipeline_on(
    cfg: &ExperimentConfig,
    fm: &FeatureMatrix,
    catalog: &EventCatalog,
    label: &str,
) -> Result<PipelineRun> {
    let master = cfg.seed;
    let config_hash = cfg.hash();

    let staged = build_task(cfg, fm, catalog).map_err(|e| at_stage("task", e))?;
    let warning = staged.warning.clone();
    let (dataset, evidence) = apply_sampling(cfg, staged.dataset, staged.evidence)
        .map_err(|e| at_stage("sampling", e))?;
    if dataset.class_counts().len() != 2 {
        return Err(at_stage(
            "sampling",
            AppError::Data("resampled labels collapsed to a single class".into()),
        ));
    }
    // Ground-truth-as-evidence builds its single source from the (possibly
    // resampled) labels.
    let evidence = match evidence {
        Some(ev) => ev,
        None => EvidenceSet::from_labels("ground-truth", &dataset.labels, 2)
            .map_err(|e| at_stage("task", e.into()))?,
    };

    // Train/evaluation row split.
    let n = dataset.len();
    let (train_rows, eval_rows): (Vec<usize>, Vec<usize>) = match cfg.evaluation.mode {
        EvaluationMode::Full => ((0..n).collect(), (0..n).collect()),
        EvaluationMode::Split => {
            let test_count = ((n as f64 * cfg.evaluation.test_fraction).round() as usize)
                .clamp(1, n - 1);
            let mut rng = Rng::new(derive_seed(master, TAG_SPLIT));
            let test = rng.sample_indices(n, test_count);
            let test_set: BTreeSet<usize> = test.iter().copied().collect();
            let train = (0..n).filter(|i| !test_set.contains(i)).collect();
            (train, test)
        }
    };

    // Initialization step: unsupervised reconstruction on all rows.
    let ae_cfg = AutoencoderConfig {
        input_dim: dataset.features.cols(),
        hidden_widths: cfg.autoencoder.hidden.clone(),
        latent_dim: cfg.autoencoder.latent,
        corruption_rate: cfg.autoencoder.corruption,
        output_activation: cfg.autoencoder.output_activation.into(),
    };
    let mut model = AutoencoderModel::init(&ae_cfg, derive_seed(master, TAG_MODEL))
        .map_err(|e| at_stage("init-train", e.into()))?;
    train_init(
        &mut model,
        &dataset.features,
        &cfg.init_train_config(derive_seed(master, TAG_INIT)),
    )
    .map_err(|e| at_stage("init-train", e.into()))?;
    let init_model = model.clone();

    // Screening: drop evidence sources that cannot generalize.
    let train_features = dataset
        .features
        .select_rows(&train_rows)
        .map_err(|e| at_stage("screening", e.into()))?;
    let mut verdicts: Vec<ScreeningVerdict> = Vec::new();
    let mut accepted_names = Vec::new();
    let mut accepted_sources = Vec::new();
    if cfg.transfer.screening {
        let screen_master = derive_seed(master, TAG_SCREEN);
        for (j, (name, source)) in evidence
            .names()
            .iter()
            .zip(evidence.sources())
            .enumerate()
        {
            let source_train = source
                .select_rows(&train_rows)
                .map_err(|e| at_stage("screening", e.into()))?;
            let verdict = screen_evidence(
                name,
                &source_train,
                &train_features,
                &cfg.screening_config(derive_seed(screen_master, j as u64)),
            )
            .map_err(|e| at_stage("screening", e.into()))?;
            if verdict.accepted {
                accepted_names.push(name.clone());
                accepted_sources.push(source.clone());
            }
            verdicts.push(verdict);
        }
        if accepted_names.is_empty() {
            return Err(at_stage(
                "screening",
                AppError::Data("all evidence sources were rejected by screening".into()),
            ));
        }
    } else {
        accepted_names = evidence.names().to_vec();
        accepted_sources = evidence.sources().to_vec();
    }
    let accepted = EvidenceSet::new(accepted_names, accepted_sources)
        .map_err(|e| at_stage("screening", e.into()))?;

    // Transfer step: joint objective on the training rows.
    let mut transferred = init_model.clone();
    transferred
        .attach_evidence_heads(&accepted, derive_seed(master, TAG_HEADS))
        .map_err(|e| at_stage("transfer-train", e.into()))?;
    let transfer_cfg = TransferConfig::new(cfg.transfer.lambda, accepted.len())
        .map_err(|e| at_stage("transfer-train", e.into()))?;
    let evidence_train = accepted
        .select_rows(&train_rows)
        .map_err(|e| at_stage("transfer-train", e.into()))?;
    train_transfer(
        &mut transferred,
        &train_features,
        &evidence_train,
        &transfer_cfg,
        &cfg.transfer_train_config(derive_seed(master, TAG_TRANSFER)),
    )
    .map_err(|e| at_stage("transfer-train", e.into()))?;

    // Detection on both arms with the same detector and seed.
    let detector_seed = derive_seed(master, TAG_DETECT);
    let baseline_latents = init_model
        .encode(&dataset.features)
        .map_err(|e| at_stage("detect", e.into()))?;
    let transfer_latents = transferred
        .encode(&dataset.features)
        .map_err(|e| at_stage("detect", e.into()))?;
    let baseline_clusters = detect_clusters(cfg, &baseline_latents, &eval_rows, detector_seed)
        .map_err(|e| at_stage("detect", e.into()))?;
    let transfer_clusters = detect_clusters(cfg, &transfer_latents, &eval_rows, detector_seed)
        .map_err(|e| at_stage("detect", e.into()))?;

    // Evaluation.
    let eval_labels: Vec<usize> = eval_rows.iter().map(|&i| dataset.labels[i]).collect();
    let metadata = ReportMetadata {
        seed: master,
        config_hash: config_hash.clone(),
    };
    let baseline_report =
        DetectionReport::from_clusters(&baseline_clusters, &eval_labels, metadata.clone())
            .map_err(|e| at_stage("evaluate", e.into()))?;
    let transfer_report =
        DetectionReport::from_clusters(&transfer_clusters, &eval_labels, metadata)
            .map_err(|e| at_stage("evaluate", e.into()))?;

    let report = RunReport {
        label: label.to_string(),
        config_hash,
        seed: master,
        warning,
        screening: verdicts,
        baseline: baseline_report,
        transfer: transfer_report,
    };

    // Render all outputs; nothing is written here.
    let baseline_eval = baseline_latents
        .select_rows(&eval_rows)
        .map_err(|e| at_stage("render", e.into()))?;
    let transfer_eval = transfer_latents
        .select_rows(&eval_rows)
        .map_err(|e| at_stage("render", e.into()))?;
    let files = vec![
        ("report.txt".to_string(), render_report(&report).into_bytes()),
        (
            "resolved_config.toml".to_string(),
            cfg.to_toml().into_bytes(),
        ),
        (
            "baseline_projection.tsv".to_string(),
            render_projection(&baseline_eval, &eval_labels)
                .map_err(|e| at_stage("render", e))?
                .into_bytes(),
        ),
        (
            "transfer_projection.tsv".to_string(),
            render_projection(&transfer_eval, &eval_labels)
                .map_err(|e| at_stage("render", e))?
                .into_bytes(),
        ),
        (
            "baseline_model.evck".to_string(),
            model_to_bytes(&init_model, master),
        ),
        (
            "transfer_model.evck".to_string(),
            model_to_bytes(&transferred, master),
        ),
    ];
    Ok(PipelineRun {
        report,
        files,
        baseline_model: init_model,
        transfer_model: transferred,
        dataset,
        eval_rows,
    })
}

/// One run per ordered (ground truth, evidence) pair of catalog types.
/// Per-cell failures are recorded and the suite continues.
pub fn run_rotation_suite(cfg: &ExperimentConfig) -> Result<SuiteRun> {
    cfg.validate()?;
    let nonsevere = match &cfg.task {
        TaskConfig::Rotation {
            nonsevere_samples, ..
        } => *nonsevere_samples,
        TaskConfig::GroundTruthAsEvidence => {
            return Err(AppError::Config(
                "the rotation suite requires a rotation task".into(),
            ))
        }
    };
    let (fm, catalog) = materialize_data(cfg).map_err(|e| at_stage("data", e))?;
    let types = catalog.present_types();
    if types.len() < 2 {
        return Err(AppError::Config(format!(
            "rotation needs at least two event types in the catalog, found {}",
            types.len()
        )));
    }

    let mut cells = Vec::new();
    let mut files = Vec::new();
    for &ground_truth in &types {
        for &evidence_type in &types {
            if ground_truth == evidence_type {
                continue;
            }
            let label = format!("rotation/{ground_truth}-{evidence_type}");
            let mut cell_cfg = cfg.clone();
            cell_cfg.task = TaskConfig::Rotation {
                ground_truth,
                evidence: vec![evidence_type],
                nonsevere_samples: nonsevere,
            };
            match run_pipeline_on(&cell_cfg, &fm, &catalog, &label) {
                Ok(run) => {
                    let dir = format!("{ground_truth}-{evidence_type}");
                    for (name, bytes) in run.files {
                        files.push((format!("{dir}/{name}"), bytes));
                    }
                    cells.push(SuiteCell {
                        label,
                        report: Some(run.report),
                        error: None,
                    });
                }
                Err(e) => cells.push(SuiteCell {
                    label,
                    report: None,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    let summary = render_rotation_summary(cfg, &cells);
    files.insert(0, ("summary.txt".to_string(), summary.into_bytes()));
    Ok(SuiteRun { cells, files })
}

fn render_rotation_summary(cfg: &ExperimentConfig, cells: &[SuiteCell]) -> String {
    let mut out = String::new();
    out.push_str("format = evitrans-rotation-summary/1\n");
    out.push_str(&format!("config_hash = {}\n", cfg.hash()));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    for cell in cells {
        let key = cell.label.replace("rotation/", "");
        match (&cell.report, &cell.error) {
            (Some(report), _) => {
                out.push_str(&format!("cell.{key}.status = ok\n"));
                let baseline = report.baseline.anomalous();
                let transfer = report.transfer.anomalous();
                for (name, b, t) in [
                    ("precision", baseline.precision, transfer.precision),
                    ("recall", baseline.recall, transfer.recall),
                    ("f1", baseline.f1, transfer.f1),
                ] {
                    out.push_str(&format!("cell.{key}.baseline.class1.{name} = {b:.6}\n"));
                    out.push_str(&format!("cell.{key}.transfer.class1.{name} = {t:.6}\n"));
                    out.push_str(&format!("cell.{key}.delta.class1.{name} = {:.6}\n", t - b));
                }
            }
            (None, Some(error)) => {
                out.push_str(&format!("cell.{key}.status = error\n"));
                out.push_str(&format!("cell.{key}.error = {error}\n"));
            }
            (None, None) => unreachable!("cell without report or error"),
        }
    }
    out
}

/// Runs the sampling-strategy comparison protocol: the same
/// ground-truth-as-evidence task under over-sampling, under-sampling and
/// the combined strategy.
pub fn run_sampling_comparison(cfg: &ExperimentConfig) -> Result<SuiteRun> {
    cfg.validate()?;
    if !matches!(cfg.task, TaskConfig::GroundTruthAsEvidence) {
        return Err(AppError::Config(
            "the sampling comparison requires the ground-truth-as-evidence task".into(),
        ));
    }
    let (fm, catalog) = materialize_data(cfg).map_err(|e| at_stage("data", e))?;
    let strategies = [
        SamplingStrategy::Oversample,
        SamplingStrategy::Undersample,
        SamplingStrategy::Combine,
    ];
    let mut cells = Vec::new();
    let mut files = Vec::new();
    for strategy in strategies {
        let name = match strategy {
            SamplingStrategy::Oversample => "oversample",
            SamplingStrategy::Undersample => "undersample",
            SamplingStrategy::Combine => "combine",
            SamplingStrategy::None => unreachable!(),
        };
        let label = format!("sampling/{name}");
        let mut cell_cfg = cfg.clone();
        cell_cfg.sampling.strategy = strategy;
        match run_pipeline_on(&cell_cfg, &fm, &catalog, &label) {
            Ok(run) => {
                for (file, bytes) in run.files {
                    files.push((format!("{name}/{file}"), bytes));
                }
                cells.push(SuiteCell {
                    label,
                    report: Some(run.report),
                    error: None,
                });
            }
            Err(e) => cells.push(SuiteCell {
                label,
                report: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let summary = render_sampling_summary(cfg, &cells);
    files.insert(0, ("summary.txt".to_string(), summary.into_bytes()));
    Ok(SuiteRun { cells, files })
}

fn render_sampling_summary(cfg: &ExperimentConfig, cells: &[SuiteCell]) -> String {
    let mut out = String::new();
    out.push_str("format = evitrans-sampling-summary/1\n");
    out.push_str(&format!("config_hash = {}\n", cfg.hash()));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out.push_str(&format!("warning = {GROUND_TRUTH_EVIDENCE_WARNING}\n"));
    for cell in cells {
        let key = cell.label.replace("sampling/", "");
        match (&cell.report, &cell.error) {
            (Some(report), _) => {
                out.push_str(&format!("cell.{key}.status = ok\n"));
                for (arm, r) in [("baseline", &report.baseline), ("transfer", &report.transfer)] {
                    out.push_str(&format!(
                        "cell.{key}.{arm}.micro.precision = {:.6}\n",
                        r.micro.precision
                    ));
                    out.push_str(&format!(
                        "cell.{key}.{arm}.micro.recall = {:.6}\n",
                        r.micro.recall
                    ));
                    out.push_str(&format!("cell.{key}.{arm}.micro.f1 = {:.6}\n", r.micro.f1));
                }
                out.push_str(&format!(
                    "cell.{key}.delta.micro.f1 = {:.6}\n",
                    report.transfer.micro.f1 - report.baseline.micro.f1
                ));
            }
            (None, Some(error)) => {
                out.push_str(&format!("cell.{key}.status = error\n"));
                out.push_str(&format!("cell.{key}.error = {error}\n"));
            }
            (None, None) => unreachable!("cell without report or error"),
        }
    }
    out
}

/// Screens every evidence source of the configured task without training
/// the main model. Used by the `screen` CLI verb.
pub fn screen_sources(cfg: &ExperimentConfig) -> Result<Vec<ScreeningVerdict>> {
    cfg.validate()?;
    let (fm, catalog) = materialize_data(cfg).map_err(|e| at_stage("data", e))?;
    let staged = build_task(cfg, &fm, &catalog).map_err(|e| at_stage("task", e))?;
    let evidence = match staged.evidence {
        Some(ev) => ev,
        None => EvidenceSet::from_labels("ground-truth", &staged.dataset.labels, 2)
            .map_err(|e| at_stage("task", e.into()))?,
    };
    let screen_master = derive_seed(cfg.seed, TAG_SCREEN);
    let mut verdicts = Vec::new();
    for (j, (name, source)) in evidence
        .names()
        .iter()
        .zip(evidence.sources())
        .enumerate()
    {
        verdicts.push(
            screen_evidence(
                name,
                source,
                &staged.dataset.features,
                &cfg.screening_config(derive_seed(screen_master, j as u64)),
            )
            .map_err(|e| at_stage("screening", e.into()))?,
        );
    }
    Ok(verdicts)
}

/// Writes rendered outputs under the output directory. If any write fails,
/// files written so far are removed, so aborted runs leave nothing behind.
pub fn write_outputs(out_dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let mut written: Vec<std::path::PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        for (rel, bytes) in files {
            let path = out_dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(())
    })();
    if result.is_err() {
        for path in written {
            let _ = fs::remove_file(path);
        }
    }
    result
}
