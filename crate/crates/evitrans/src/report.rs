//! Structured-text run reports: stable key order, fixed 6-decimal floats,
//! parse-back support so emitted files can be verified and diffed.

use std::collections::BTreeMap;

use evitrans_core::metrics::{DetectionReport, Prf1};
use evitrans_core::train::ScreeningVerdict;

use crate::error::{AppError, Result};

pub const REPORT_FORMAT: &str = "evitrans-report/1";

/// Everything one pipeline run reports: the baseline arm, the
/// evidence-transfer arm, and their deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Run identifier, e.g. `run`, `rotation/windstorm-flood`,
    /// `sampling/undersample`.
    pub label: String,
    pub config_hash: String,
    pub seed: u64,
    /// Banner for protocols that would be unrealistic in production, such
    /// as feeding ground-truth labels back as evidence.
    pub warning: Option<String>,
    pub screening: Vec<ScreeningVerdict>,
    pub baseline: DetectionReport,
    pub transfer: DetectionReport,
}

fn push_kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("{key} = {value}\n"));
}

fn push_metric(out: &mut String, key: &str, value: f64) {
    out.push_str(&format!("{key} = {value:.6}\n"));
}

fn push_prf1(out: &mut String, prefix: &str, m: &Prf1) {
    push_metric(out, &format!("{prefix}.precision"), m.precision);
    push_metric(out, &format!("{prefix}.recall"), m.recall);
    push_metric(out, &format!("{prefix}.f1"), m.f1);
    if m.degenerate {
        push_kv(out, &format!("{prefix}.degenerate"), "true");
    }
}

fn push_detection(out: &mut String, arm: &str, report: &DetectionReport) {
    for (class, metrics) in &report.per_class {
        push_prf1(out, &format!("{arm}.class{class}"), metrics);
    }
    push_prf1(out, &format!("{arm}.micro"), &report.micro);
    push_kv(out, &format!("{arm}.confusion.tp"), report.confusion.true_positive);
    push_kv(out, &format!("{arm}.confusion.fp"), report.confusion.false_positive);
    push_kv(out, &format!("{arm}.confusion.fn"), report.confusion.false_negative);
    push_kv(out, &format!("{arm}.confusion.tn"), report.confusion.true_negative);
    let mapping: Vec<String> = report
        .mapping
        .iter()
        .enumerate()
        .map(|(c, l)| format!("{c}->{l}"))
        .collect();
    push_kv(out, &format!("{arm}.mapping"), mapping.join(","));
}

/// Renders the report in its canonical byte-stable form.
pub fn render_report(report: &RunReport) -> String {
    let mut out = String::new();
    push_kv(&mut out, "format", REPORT_FORMAT);
    push_kv(&mut out, "label", &report.label);
    push_kv(&mut out, "config_hash", &report.config_hash);
    push_kv(&mut out, "seed", report.seed);
    if let Some(warning) = &report.warning {
        push_kv(&mut out, "warning", warning);
    }
    for verdict in &report.screening {
        let prefix = format!("screening.{}", verdict.source_name);
        push_metric(&mut out, &format!("{prefix}.mean_entropy"), verdict.mean_entropy);
        push_metric(&mut out, &format!("{prefix}.entropy_ratio"), verdict.entropy_ratio);
        push_kv(&mut out, &format!("{prefix}.accepted"), verdict.accepted);
    }
    push_detection(&mut out, "baseline", &report.baseline);
    push_detection(&mut out, "transfer", &report.transfer);
    // Deltas mirror the paper's "(+0.13)" notation: transfer minus baseline.
    let anomalous_delta = [
        ("precision", report.transfer.anomalous().precision - report.baseline.anomalous().precision),
        ("recall", report.transfer.anomalous().recall - report.baseline.anomalous().recall),
        ("f1", report.transfer.anomalous().f1 - report.baseline.anomalous().f1),
    ];
    for (name, value) in anomalous_delta {
        push_metric(&mut out, &format!("delta.class1.{name}"), value);
    }
    let micro_delta = [
        ("precision", report.transfer.micro.precision - report.baseline.micro.precision),
        ("recall", report.transfer.micro.recall - report.baseline.micro.recall),
        ("f1", report.transfer.micro.f1 - report.baseline.micro.f1),
    ];
    for (name, value) in micro_delta {
        push_metric(&mut out, &format!("delta.micro.{name}"), value);
    }
    out
}

/// A parsed report: raw key/value pairs with typed accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub values: BTreeMap<String, String>,
}

impl ParsedReport {
    pub fn metric(&self, key: &str) -> Result<f64> {
        self.values
            .get(key)
            .ok_or_else(|| AppError::Data(format!("report is missing key '{key}'")))?
            .parse()
            .map_err(|_| AppError::Data(format!("report key '{key}' is not a number")))
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| AppError::Data(format!("report is missing key '{key}'")))
    }
}

pub fn parse_report(text: &str) -> Result<ParsedReport> {
    let mut values = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line.split_once(" = ").ok_or_else(|| {
            AppError::Data(format!("report line {}: expected 'key = value'", idx + 1))
        })?;
        values.insert(key.trim().to_string(), value.trim().to_string());
    }
    let parsed = ParsedReport { values };
    if parsed.text("format")? != REPORT_FORMAT {
        return Err(AppError::Data("unsupported report format".into()));
    }
    Ok(parsed)
}
