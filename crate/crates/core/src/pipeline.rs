//! The `advise` pipeline: group, attach hotness, filter, classify, estimate
//! and rank.

use crate::Parsed;
use crate::advise::{AdviseError, ArchModel, KnowledgeBase};
use crate::correlate::{attach_hotness, filter_hot, group_by_loc};
use crate::profile::Profile;
use crate::remark::Remark;
use crate::report::{AdviceReport, ReportMetadata, rank};

#[derive(Debug, Clone, PartialEq)]
pub struct AdviseOptions {
    pub threshold_percent: f64,
    pub keep_unknown: bool,
    pub arch: Option<ArchModel>,
    pub element_bits: u32,
    /// Keep only the N highest-ranked entries.
    pub top: Option<usize>,
    pub inputs: Vec<String>,
}

impl Default for AdviseOptions {
    fn default() -> Self {
        Self {
            threshold_percent: 1.0,
            keep_unknown: true,
            arch: Some(ArchModel::sve512()),
            element_bits: 64,
            top: None,
            inputs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdviseOutcome {
    pub report: AdviceReport,
    /// Surviving sites with at least one non-vectorized blocker, counted
    /// before `top` truncation.
    pub findings: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PipelineError {
    #[error("threshold must be a non-negative number, got {0}")]
    Threshold(f64),
    #[error(transparent)]
    Advise(#[from] AdviseError),
}

pub fn run_advise(
    remarks: Vec<Remark>,
    profile: Option<&Profile>,
    kb: &KnowledgeBase,
    opts: &AdviseOptions,
) -> Result<Parsed<AdviseOutcome>, PipelineError> {
    if opts.threshold_percent.is_nan() || opts.threshold_percent < 0.0 {
        return Err(PipelineError::Threshold(opts.threshold_percent));
    }
    let grouped = group_by_loc(remarks);
    let Parsed { value: sites, warnings } = attach_hotness(grouped.sites, profile);
    let sites = filter_hot(sites, opts.threshold_percent, opts.keep_unknown);

    let mut entries = Vec::with_capacity(sites.len());
    for site in sites {
        let mut entry = kb.advise(site);
        if let Some(arch) = &opts.arch
            && entry.has_blockers()
        {
            entry.benefit_estimate = kb.estimate_benefit(&entry.categories, opts.element_bits, arch)?;
        }
        entries.push(entry);
    }
    let findings = entries.iter().filter(|e| e.has_blockers()).count();

    let mut entries = rank(&entries);
    if let Some(n) = opts.top {
        entries.truncate(n);
    }

    let report = AdviceReport {
        metadata: ReportMetadata {
            inputs: opts.inputs.clone(),
            threshold_percent: opts.threshold_percent,
            keep_unknown: opts.keep_unknown,
            arch: opts.arch.as_ref().map(|a| a.name.clone()),
            element_bits: opts.arch.as_ref().map(|_| opts.element_bits),
            ..ReportMetadata::default()
        },
        entries,
        unlocated_remarks: grouped.unlocated,
    };
    Ok(Parsed {
        value: AdviseOutcome { report, findings },
        warnings,
    })
}
