//! Vectorization-blocker taxonomy, the remedy knowledge base, and per-site
//! advice.
//!
//! Classification is a first-match substring scan over the remark message.
//! Remedy texts use the placeholders `<op>`, `<var>`, `<ptrs>`, `<bytes>`,
//! `<library>` and `<cond>` wherever the value cannot be recovered from the
//! remark alone.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlate::LoopSite;
use crate::remark::{Remark, RemarkKind};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BlockerCategory {
    FpReorder,
    UnknownBounds,
    Libcall,
    NoreturnExit,
    CfSelect,
    UnidentifiedBounds,
    Vectorized,
    Unknown,
}

impl BlockerCategory {
    /// Declaration order; also the order remedies are concatenated in.
    pub const ALL: [BlockerCategory; 8] = [
        Self::FpReorder,
        Self::UnknownBounds,
        Self::Libcall,
        Self::NoreturnExit,
        Self::CfSelect,
        Self::UnidentifiedBounds,
        Self::Vectorized,
        Self::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FpReorder => "FP_REORDER",
            Self::UnknownBounds => "UNKNOWN_BOUNDS",
            Self::Libcall => "LIBCALL",
            Self::NoreturnExit => "NORETURN_EXIT",
            Self::CfSelect => "CF_SELECT",
            Self::UnidentifiedBounds => "UNIDENTIFIED_BOUNDS",
            Self::Vectorized => "VECTORIZED",
            Self::Unknown => "UNKNOWN",
        }
    }

    pub fn is_bounds(self) -> bool {
        matches!(self, Self::UnknownBounds | Self::UnidentifiedBounds)
    }
}

impl fmt::Display for BlockerCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockerCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown blocker category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemedyKind {
    Directive,
    Flag,
    Transformation,
    Caution,
}

impl RemedyKind {
    pub const ALL: [RemedyKind; 4] = [Self::Directive, Self::Flag, Self::Transformation, Self::Caution];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Directive => "directive",
            Self::Flag => "flag",
            Self::Transformation => "transformation",
            Self::Caution => "caution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Remedy {
    pub kind: RemedyKind,
    pub text: String,
    pub rationale: String,
    /// Present on every remedy whose application can change program results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correctness_note: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RemedyError {
    #[error("remedy text is empty")]
    EmptyText,
    #[error("directive remedy must start with `#pragma `: `{0}`")]
    NotAPragma(String),
}

impl Remedy {
    fn new(kind: RemedyKind, text: &str, rationale: &str, note: Option<&str>) -> Self {
        Self {
            kind,
            text: text.to_string(),
            rationale: rationale.to_string(),
            correctness_note: note.map(str::to_string),
        }
    }

    pub fn validate(&self) -> Result<(), RemedyError> {
        if self.text.trim().is_empty() {
            return Err(RemedyError::EmptyText);
        }
        if self.kind == RemedyKind::Directive && !self.text.starts_with("#pragma ") {
            return Err(RemedyError::NotAPragma(self.text.clone()));
        }
        Ok(())
    }
}

/// Default `substring -> category` table, in precedence order.
pub const DEFAULT_RULES: [(&str, BlockerCategory); 6] = [
    ("safe to reorder floating-point operations", BlockerCategory::FpReorder),
    ("Unknown array bounds", BlockerCategory::UnknownBounds),
    ("library call cannot be vectorized", BlockerCategory::Libcall),
    ("control flow that does not return", BlockerCategory::NoreturnExit),
    ("cannot be substituted for a select", BlockerCategory::CfSelect),
    ("cannot identify array bounds", BlockerCategory::UnidentifiedBounds),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyRule {
    pub substring: String,
    pub category: BlockerCategory,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdviseError {
    #[error("no remedies exist for category {0}")]
    InvalidCategory(BlockerCategory),
    #[error("element width must be one of 8, 16, 32, 64 bits, got {0}")]
    BadElementWidth(u32),
    #[error("vector width must be one of 128, 256, 512, 1024, 2048 bits, got {0}")]
    BadVectorWidth(u32),
    #[error("classification rule for {0} cannot be VECTORIZED or have an empty substring")]
    BadRule(BlockerCategory),
    #[error("remedy for {category}: {source}")]
    BadRemedy {
        category: BlockerCategory,
        #[source]
        source: RemedyError,
    },
}

/// Whether a pass name belongs to a vectorizer (`loop-vectorize`,
/// `slp-vectorizer`, ...).
pub fn is_vectorization_pass(pass: &str) -> bool {
    pass.contains("vectori")
}

const ALIAS_NOTE: &str = "Asserts the accessed memory ranges never overlap; if they can alias, the vectorized loop produces wrong results.";
const FP_ORDER_NOTE: &str = "Floating-point operations are reassociated; results may differ from the sequential IEEE-compliant order.";
const VECMATH_NOTE: &str = "Vector math-library variants can lose precision relative to the scalar libm result.";

fn omp_simd() -> Remedy {
    Remedy::new(
        RemedyKind::Directive,
        "#pragma omp simd",
        "Tells the vectorizer the loop is safe to execute in SIMD form, bypassing the failed dependence/bounds check.",
        Some(ALIAS_NOTE),
    )
}

fn interchange() -> Remedy {
    Remedy::new(
        RemedyKind::Transformation,
        "interchange (transpose) the loop nest so the inner loop walks the storage-major dimension",
        "With column-major matrices an inner loop over a row scatters its stores; iterating rows innermost makes them contiguous and helps even without vectorization.",
        Some("Only legal when iterations are independent and the nest bounds permit the swap (e.g. square matrices)."),
    )
}

/// The built-in remedy list for a category.
pub fn default_remedies(category: BlockerCategory) -> Result<Vec<Remedy>, AdviseError> {
    use BlockerCategory as C;
    use RemedyKind::*;
    let list = match category {
        C::FpReorder => vec![
            Remedy::new(
                Directive,
                "#pragma omp simd reduction(<op>:<var>)",
                "Makes the parallel reduction explicit so lanes accumulate partial results; add aligned(<ptrs> : <bytes>) (e.g. 64) when pointer alignment is known to enable aligned vector loads.",
                Some(FP_ORDER_NOTE),
            ),
            Remedy::new(
                Flag,
                "-ffast-math",
                "Allows the compiler to reorder floating-point operations in the whole translation unit.",
                Some("Relaxes IEEE semantics for every function in the translation unit, not just this loop."),
            ),
            Remedy::new(
                Directive,
                "#pragma clang loop vectorize(enable)",
                "Clang-specific request to vectorize this loop, allowing the reduction to be reordered.",
                Some(FP_ORDER_NOTE),
            ),
            Remedy::new(
                Caution,
                "vectorizing this reduction changes the floating-point evaluation order and breaks strict IEEE compliance",
                "Check that the application tolerates reassociated sums.",
                Some(FP_ORDER_NOTE),
            ),
        ],
        C::UnknownBounds => vec![
            omp_simd(),
            Remedy::new(
                Caution,
                "no-alias assertion is unchecked: verify the accessed arrays never overlap",
                "The compiler could not bound the accessed ranges, so it cannot emit a runtime alias check.",
                Some(ALIAS_NOTE),
            ),
        ],
        C::Libcall => vec![
            Remedy::new(
                Flag,
                "-fsimdmath",
                "Arm compiler: links the vector math library so calls such as sin/cos get SIMD variants.",
                Some(VECMATH_NOTE),
            ),
            Remedy::new(
                Flag,
                "-fveclib=<library>",
                "Clang: selects a vector math library (e.g. ArmPL, SLEEF, libmvec) providing SIMD variants of the call.",
                Some(VECMATH_NOTE),
            ),
            Remedy::new(
                Flag,
                "-fno-math-errno",
                "Lets the loop vectorize around the call (-ffast-math also works), but lanes are unpacked and the scalar function runs once per lane.",
                Some("math functions no longer set errno; code that inspects errno after the call changes behavior."),
            ),
            Remedy::new(
                Caution,
                "vector math libraries can change the precision of the result",
                "Validate numerical results after enabling a vector math library.",
                Some(VECMATH_NOTE),
            ),
        ],
        C::NoreturnExit => vec![
            Remedy::new(
                Flag,
                "-DNDEBUG",
                "Defines NDEBUG at compilation so assertions (e.g. bounds checks in accessors) vanish from the loop exit path.",
                Some("Disables all assert() checks in the translation unit."),
            ),
            Remedy::new(
                Caution,
                "disabling assertions creates a divergence between debug and release builds",
                "Assertion failures will no longer stop the program in builds compiled this way.",
                Some("Bounds violations that an assertion would have caught become silent."),
            ),
        ],
        C::CfSelect => vec![
            interchange(),
            Remedy::new(
                Transformation,
                "hoist loop-invariant and once-per-outer-iteration conditional updates out of the inner loop",
                "Masked vectorization evaluates both sides of every branch; a diagonal-only update is otherwise computed each iteration and thrown away.",
                None,
            ),
            Remedy::new(
                Directive,
                "#pragma omp assume holds(<cond>)",
                "OpenMP 5.1 assume directive asserting, for example, that a divisor is never zero, so the division cannot fault under a mask.",
                Some("If the asserted condition is ever false the program has undefined behavior."),
            ),
            omp_simd(),
        ],
        C::UnidentifiedBounds => {
            let mut v = default_remedies(C::UnknownBounds)?;
            v.push(interchange());
            v
        }
        C::Unknown => vec![Remedy::new(
            Caution,
            "unrecognized vectorization blocker; inspect the remark text",
            "No rule in the classification table matched this remark.",
            None,
        )],
        C::Vectorized => return Err(AdviseError::InvalidCategory(C::Vectorized)),
    };
    Ok(list)
}

/// Multipliers applied by [`KnowledgeBase::estimate_benefit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenefitDiscounts {
    /// Applied when a bounds category is present (gather/scatter bound).
    pub bounds: f64,
    /// Applied when a floating-point reduction is present (reduction tail).
    pub reduction: f64,
}

impl Default for BenefitDiscounts {
    fn default() -> Self {
        Self {
            bounds: 0.5,
            reduction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchModel {
    pub name: String,
    pub vector_bits: u32,
    pub supports_gather: bool,
}

impl ArchModel {
    pub fn new(name: impl Into<String>, vector_bits: u32, supports_gather: bool) -> Result<Self, AdviseError> {
        if !matches!(vector_bits, 128 | 256 | 512 | 1024 | 2048) {
            return Err(AdviseError::BadVectorWidth(vector_bits));
        }
        Ok(Self {
            name: name.into(),
            vector_bits,
            supports_gather,
        })
    }

    pub fn sve512() -> Self {
        Self::new("sve512", 512, true).unwrap()
    }

    pub fn neon128() -> Self {
        Self::new("neon128", 128, false).unwrap()
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "sve512" => Some(Self::sve512()),
            "neon128" => Some(Self::neon128()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceEntry {
    pub site: LoopSite,
    pub categories: BTreeSet<BlockerCategory>,
    pub remedies: Vec<Remedy>,
    /// Heuristic upper bound on the vector speedup, when computed.
    #[serde(default)]
    pub benefit_estimate: Option<f64>,
    pub already_vectorized: bool,
}

impl AdviceEntry {
    /// The site is a finding when some blocker other than VECTORIZED was seen.
    pub fn has_blockers(&self) -> bool {
        self.categories.iter().any(|&c| c != BlockerCategory::Vectorized)
    }
}

/// Classification rules, remedy lists and benefit constants. Immutable once
/// built; share freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    rules: Vec<ClassifyRule>,
    remedies: BTreeMap<BlockerCategory, Vec<Remedy>>,
    pub discounts: BenefitDiscounts,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        let rules = DEFAULT_RULES
            .iter()
            .map(|&(s, c)| ClassifyRule {
                substring: s.to_string(),
                category: c,
            })
            .collect();
        let remedies = BlockerCategory::ALL
            .into_iter()
            .filter_map(|c| default_remedies(c).ok().map(|r| (c, r)))
            .collect();
        Self {
            rules,
            remedies,
            discounts: BenefitDiscounts::default(),
        }
    }
}

impl KnowledgeBase {
    pub fn rules(&self) -> &[ClassifyRule] {
        &self.rules
    }

    /// Replaces the classification table.
    pub fn set_rules(&mut self, rules: Vec<ClassifyRule>) -> Result<(), AdviseError> {
        for r in &rules {
            if r.substring.is_empty() || r.category == BlockerCategory::Vectorized {
                return Err(AdviseError::BadRule(r.category));
            }
        }
        self.rules = rules;
        Ok(())
    }

    /// Appends rules after the current table (lowest precedence).
    pub fn extend_rules(&mut self, rules: Vec<ClassifyRule>) -> Result<(), AdviseError> {
        let mut all = std::mem::take(&mut self.rules);
        all.extend(rules);
        self.set_rules(all)
    }

    pub fn set_remedies(&mut self, category: BlockerCategory, list: Vec<Remedy>) -> Result<(), AdviseError> {
        if category == BlockerCategory::Vectorized {
            return Err(AdviseError::InvalidCategory(category));
        }
        for r in &list {
            r.validate()
                .map_err(|source| AdviseError::BadRemedy { category, source })?;
        }
        self.remedies.insert(category, list);
        Ok(())
    }

    pub fn classify_message(&self, message: &str) -> BlockerCategory {
        self.rules
            .iter()
            .find(|r| message.contains(&r.substring))
            .map_or(BlockerCategory::Unknown, |r| r.category)
    }

    pub fn classify(&self, remark: &Remark) -> BlockerCategory {
        if remark.kind == RemarkKind::Passed && is_vectorization_pass(&remark.pass) {
            return BlockerCategory::Vectorized;
        }
        self.classify_message(&remark.message())
    }

    pub fn remedies(&self, category: BlockerCategory) -> Result<&[Remedy], AdviseError> {
        self.remedies
            .get(&category)
            .map(Vec::as_slice)
            .ok_or(AdviseError::InvalidCategory(category))
    }

    /// Whether a remark at a site is about vectorization at all. Other passes'
    /// remarks (inlining, unrolling, ...) share loop lines but are not blockers.
    pub fn is_relevant(&self, remark: &Remark) -> bool {
        is_vectorization_pass(&remark.pass)
            || self.classify_message(&remark.message()) != BlockerCategory::Unknown
    }

    pub fn advise(&self, site: LoopSite) -> AdviceEntry {
        let categories: BTreeSet<_> = site
            .remarks
            .iter()
            .filter(|r| self.is_relevant(r))
            .map(|r| self.classify(r))
            .collect();

        let mut seen = HashSet::new();
        let remedies = categories
            .iter()
            .filter(|&&c| c != BlockerCategory::Vectorized)
            .flat_map(|&c| self.remedies(c).unwrap_or_default().iter())
            .filter(|r| seen.insert((r.kind, r.text.clone())))
            .cloned()
            .collect();

        let already_vectorized = categories.len() == 1 && categories.contains(&BlockerCategory::Vectorized);
        let mut categories = categories;
        categories.remove(&BlockerCategory::Vectorized);
        AdviceEntry {
            site,
            categories,
            remedies,
            benefit_estimate: None,
            already_vectorized,
        }
    }

    /// Heuristic upper bound on the speedup from vectorizing a loop with the
    /// given blockers: lanes times discounts, floored at 1. `None` when the
    /// loop needs gathers the architecture lacks.
    pub fn estimate_benefit(
        &self,
        categories: &BTreeSet<BlockerCategory>,
        element_bits: u32,
        arch: &ArchModel,
    ) -> Result<Option<f64>, AdviseError> {
        if !matches!(element_bits, 8 | 16 | 32 | 64) {
            return Err(AdviseError::BadElementWidth(element_bits));
        }
        let bounds = categories.iter().any(|c| c.is_bounds());
        if bounds && !arch.supports_gather {
            return Ok(None);
        }
        let mut estimate = f64::from(arch.vector_bits / element_bits);
        if bounds {
            estimate *= self.discounts.bounds;
        }
        if categories.contains(&BlockerCategory::FpReorder) {
            estimate *= self.discounts.reduction;
        }
        Ok(Some(estimate.max(1.0)))
    }
}

pub fn classify(remark: &Remark) -> BlockerCategory {
    KnowledgeBase::default().classify(remark)
}
