//! Triage for compiler vectorization feedback.
//!
//! Reads optimization-remark streams and flat profiles, groups remarks into
//! loop sites, keeps the hot ones, classifies why each failed to vectorize
//! and attaches concrete remedies (OpenMP SIMD directives, compiler flags,
//! loop transformations). Companion analyses break profiles into categories,
//! diff hardware-counter tables and compare run summaries.

pub mod advise;
pub mod config;
pub mod correlate;
pub mod counters;
pub mod pipeline;
pub mod profile;
pub mod remark;
pub mod report;

pub use advise::{
    AdviceEntry, ArchModel, BlockerCategory, KnowledgeBase, Remedy, RemedyKind, classify,
};
pub use correlate::{HotnessSource, LoopSite};
pub use profile::{Breakdown, Category, CategoryRule, Profile, ProfileSample};
pub use remark::{ParseMode, Remark, RemarkArg, RemarkKind, SourceLoc};
pub use report::{AdviceReport, RunComparison, RunSummary};

/// A parsed value together with the non-fatal warnings produced on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T: Default> Default for Parsed<T> {
    fn default() -> Self {
        Self {
            value: T::default(),
            warnings: Vec::new(),
        }
    }
}
