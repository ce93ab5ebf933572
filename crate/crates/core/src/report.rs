//! Ranked advice reports (human text and versioned JSON) and run-to-run
//! comparisons.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advise::{AdviceEntry, RemedyKind};
use crate::correlate::HotnessSource;
use crate::profile::record_line;
use crate::remark::Remark;

/// Version of the structured report layout described by
/// `schema/advice_report.schema.json`.
pub const SCHEMA_VERSION: u32 = 1;

pub const REPORT_SCHEMA: &str = include_str!("../schema/advice_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub schema_version: u32,
    pub tool_version: String,
    pub inputs: Vec<String>,
    pub threshold_percent: f64,
    pub keep_unknown: bool,
    pub arch: Option<String>,
    pub element_bits: Option<u32>,
}

impl Default for ReportMetadata {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            threshold_percent: 1.0,
            keep_unknown: true,
            arch: None,
            element_bits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdviceReport {
    pub metadata: ReportMetadata,
    pub entries: Vec<AdviceEntry>,
    #[serde(rename = "unlocated")]
    pub unlocated_remarks: Vec<Remark>,
}

/// Report order: known hotness descending, unknown last, then `(file, line)`.
pub fn report_order(a: &AdviceEntry, b: &AdviceEntry) -> Ordering {
    let by_hotness = match (a.site.hotness_percent, b.site.hotness_percent) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    by_hotness.then_with(|| {
        (&a.site.loc.file, a.site.loc.line).cmp(&(&b.site.loc.file, b.site.loc.line))
    })
}

pub fn rank(entries: &[AdviceEntry]) -> Vec<AdviceEntry> {
    let mut out = entries.to_vec();
    out.sort_by(report_order);
    out
}

pub fn render_text(report: &AdviceReport) -> String {
    let mut out = String::new();
    let m = &report.metadata;
    let _ = writeln!(out, "SIMD advisor report (simd-advisor {}, schema {})", m.tool_version, m.schema_version);
    let _ = writeln!(
        out,
        "threshold: {}% | keep unknown hotness: {} | arch: {}",
        m.threshold_percent,
        if m.keep_unknown { "yes" } else { "no" },
        m.arch.as_deref().unwrap_or("-")
    );
    if !m.inputs.is_empty() {
        let _ = writeln!(out, "inputs: {}", m.inputs.join(", "));
    }
    out.push('\n');

    if report.entries.is_empty() {
        out.push_str("no advice entries\n");
    }
    for (i, e) in report.entries.iter().enumerate() {
        let site = &e.site;
        let hotness = match (site.hotness_percent, site.hotness_source) {
            (Some(p), HotnessSource::Profile) => format!("hotness {p:.2}% (profile)"),
            (Some(p), _) => format!("hotness {p:.2}% (embedded PGO)"),
            (None, _) => "hotness unknown".to_string(),
        };
        let _ = writeln!(out, "[{}] {}  in {}  {}", i + 1, site.loc, site.function, hotness);
        if e.already_vectorized {
            out.push_str("    already vectorized\n\n");
            continue;
        }
        let cats: Vec<_> = e.categories.iter().map(|c| c.as_str()).collect();
        let _ = writeln!(
            out,
            "    blockers: {}",
            if cats.is_empty() { "none".to_string() } else { cats.join(", ") }
        );
        if let Some(b) = e.benefit_estimate {
            let _ = writeln!(out, "    estimated benefit: up to {b:.1}x (heuristic upper bound)");
        }
        for kind in RemedyKind::ALL {
            let group: Vec<_> = e.remedies.iter().filter(|r| r.kind == kind).collect();
            if group.is_empty() {
                continue;
            }
            let _ = writeln!(out, "    {}:", kind.as_str());
            for r in group {
                let _ = writeln!(out, "      {}", r.text);
                let _ = writeln!(out, "          {}", r.rationale);
                if let Some(note) = &r.correctness_note {
                    let _ = writeln!(out, "          CAUTION: {note}");
                }
            }
        }
        out.push('\n');
    }

    if !report.unlocated_remarks.is_empty() {
        let _ = writeln!(out, "unlocated remarks ({}):", report.unlocated_remarks.len());
        for r in &report.unlocated_remarks {
            let _ = writeln!(out, "  {} {}/{} in {}: {}", r.kind, r.pass, r.name, r.function, r.message());
        }
    }
    out
}

pub fn render_structured(report: &AdviceReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid structured report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
}

pub fn parse_structured(input: &str) -> Result<AdviceReport, ReportError> {
    let report: AdviceReport = serde_json::from_str(input)?;
    if report.metadata.schema_version != SCHEMA_VERSION {
        return Err(ReportError::SchemaVersion(report.metadata.schema_version));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub wall_seconds: Option<f64>,
    pub gflops: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub baseline_label: String,
    pub other_label: String,
    /// baseline seconds ÷ other seconds.
    pub time_speedup: Option<f64>,
    /// other GFlops ÷ baseline GFlops.
    pub gflops_ratio: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RunError {
    #[error("bad header: expected `label,wall_seconds,gflops`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("`{0}` and `{1}` share no metric")]
    NoSharedMetric(String, String),
}

impl RunSummary {
    pub fn new(label: impl Into<String>, wall_seconds: Option<f64>, gflops: Option<f64>) -> Result<Self, String> {
        let s = Self {
            label: label.into(),
            wall_seconds,
            gflops,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), String> {
        if self.wall_seconds.is_none() && self.gflops.is_none() {
            return Err(format!("run `{}` has neither wall_seconds nor gflops", self.label));
        }
        for v in [self.wall_seconds, self.gflops].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("run `{}`: metric {v} must be positive", self.label));
            }
        }
        Ok(())
    }
}

/// Parses `label,wall_seconds,gflops`; empty cells mean the metric is absent.
pub fn parse_runs(input: &str) -> Result<Vec<RunSummary>, RunError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| RunError::BadHeader(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["label", "wall_seconds", "gflops"] {
        return Err(RunError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut runs = Vec::new();
    for record in reader.records() {
        let rec = record.map_err(|e| RunError::BadRow {
            line: record_line(e.position()),
            reason: e.to_string(),
        })?;
        let line = record_line(rec.position());
        let bad = |reason: String| RunError::BadRow { line, reason };
        let metric = |raw: &str| -> Result<Option<f64>, RunError> {
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse().map(Some).map_err(|_| bad(format!("bad number `{raw}`")))
        };
        let run = RunSummary::new(&rec[0], metric(&rec[1])?, metric(&rec[2])?).map_err(bad)?;
        runs.push(run);
    }
    Ok(runs)
}

pub fn compare_runs(baseline: &RunSummary, other: &RunSummary) -> Result<RunComparison, RunError> {
    let time_speedup = baseline.wall_seconds.zip(other.wall_seconds).map(|(b, o)| b / o);
    let gflops_ratio = baseline.gflops.zip(other.gflops).map(|(b, o)| o / b);
    if time_speedup.is_none() && gflops_ratio.is_none() {
        return Err(RunError::NoSharedMetric(baseline.label.clone(), other.label.clone()));
    }
    Ok(RunComparison {
        baseline_label: baseline.label.clone(),
        other_label: other.label.clone(),
        time_speedup,
        gflops_ratio,
    })
}
