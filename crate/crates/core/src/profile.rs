//! Flat profiles (perf-report text or normalized CSV) and the four-way
//! category breakdown: application, scientific libraries, runtime, other.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Parsed;
use crate::remark::ParseMode;

/// Producer output may round percentages; totals up to this bound are accepted.
pub const TOTAL_PERCENT_LIMIT: f64 = 100.5;

/// Rules shipped with the tool; see `crates/core/config/categories.rules`.
pub const DEFAULT_CATEGORY_RULES: &str = include_str!("../config/categories.rules");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub symbol: String,
    pub module: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Profile {
    pub samples: Vec<ProfileSample>,
    pub source_label: String,
}

impl Profile {
    pub fn total_percent(&self) -> f64 {
        self.samples.iter().map(|s| s.percent).sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("bad header: expected `symbol,module,percent`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("no profile samples found")]
    NoSamples,
    #[error("sample percentages sum to {0:.3}, above the {TOTAL_PERCENT_LIMIT} limit")]
    TotalExceeded(f64),
}

fn check_sample(symbol: &str, percent: f64) -> Result<(), String> {
    if symbol.is_empty() {
        return Err("empty symbol".into());
    }
    if !(0.0..=100.0).contains(&percent) {
        return Err(format!("percent {percent} outside 0..=100"));
    }
    Ok(())
}

fn check_total(profile: &Profile) -> Result<(), ProfileError> {
    let total = profile.total_percent();
    if total > TOTAL_PERCENT_LIMIT {
        return Err(ProfileError::TotalExceeded(total));
    }
    Ok(())
}

/// Parses the normalized `symbol,module,percent` CSV.
pub fn parse_profile_csv(
    input: &str,
    label: &str,
    mode: ParseMode,
) -> Result<Parsed<Profile>, ProfileError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| ProfileError::BadHeader(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["symbol", "module", "percent"] {
        return Err(ProfileError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut out = Parsed::<Profile>::default();
    out.value.source_label = label.to_string();
    for record in reader.records() {
        let (line, row) = match record {
            Ok(rec) => (record_line(rec.position()), profile_row(&rec)),
            Err(e) => (record_line(e.position()), Err(e.to_string())),
        };
        match row {
            Ok(sample) => out.value.samples.push(sample),
            Err(reason) => match mode {
                ParseMode::Strict => return Err(ProfileError::BadRow { line, reason }),
                ParseMode::Lenient => out.warnings.push(format!("line {line}: {reason}, skipped")),
            },
        }
    }
    check_total(&out.value)?;
    Ok(out)
}

pub(crate) fn record_line(pos: Option<&csv::Position>) -> usize {
    pos.map_or(0, |p| p.line() as usize)
}

fn profile_row(rec: &csv::StringRecord) -> Result<ProfileSample, String> {
    if rec.len() != 3 {
        return Err(format!("expected 3 fields, found {}", rec.len()));
    }
    let percent: f64 = rec[2]
        .parse()
        .map_err(|_| format!("bad percent `{}`", &rec[2]))?;
    check_sample(&rec[0], percent)?;
    Ok(ProfileSample {
        symbol: rec[0].to_string(),
        module: rec[1].to_string(),
        percent,
    })
}

static PERF_LINE:LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(\d+(?:\.\d+)?)%\s+(\S+)\s+(\S+)\s+(?:\[(.)\]\s+)?(\S.*?)\s*$").unwrap()
});

/// Parses `perf report --stdio` flat output:
/// `  <pct>%  <command>  <module>  [.] <symbol>`.
pub fn parse_perf_report(
    input: &str,
    label: &str,
    mode: ParseMode,
) -> Result<Parsed<Profile>, ProfileError> {
    let mut out = Parsed::<Profile>::default();
    out.value.source_label = label.to_string();
    for (idx, line) in input.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some(caps) = PERF_LINE.captures(line) else {
            out.warnings
                .push(format!("line {}: not a profile line, skipped", idx + 1));
            continue;
        };
        let percent: f64 = caps[1].parse().expect("regex guarantees a decimal");
        let symbol = caps[5].to_string();
        if let Err(reason) = check_sample(&symbol, percent) {
            match mode {
                ParseMode::Strict => return Err(ProfileError::BadRow { line: idx + 1, reason }),
                ParseMode::Lenient => {
                    out.warnings.push(format!("line {}: {reason}, skipped", idx + 1));
                    continue;
                }
            }
        }
        out.value.samples.push(ProfileSample {
            symbol,
            module: caps[3].to_string(),
            percent,
        });
    }
    if out.value.samples.is_empty() && mode == ParseMode::Strict {
        return Err(ProfileError::NoSamples);
    }
    check_total(&out.value)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Application,
    ScientificLibraries,
    Runtime,
    Other,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Application,
        Category::ScientificLibraries,
        Category::Runtime,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Application => "application",
            Category::ScientificLibraries => "scientific_libraries",
            Category::Runtime => "runtime",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// Glob pattern (`*` wildcard only) anchored at both ends. A rule matches a
/// sample when the pattern matches either `module:symbol` or the bare symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryRule {
    pub pattern: String,
    pub category: Category,
}

impl CategoryRule {
    pub fn new(pattern: impl Into<String>, category: Category) -> Self {
        Self {
            pattern: pattern.into(),
            category,
        }
    }

    pub fn matches(&self, sample: &ProfileSample) -> bool {
        glob_match(&self.pattern, &sample.symbol)
            || glob_match(&self.pattern, &format!("{}:{}", sample.module, sample.symbol))
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("rule file line {line}: {reason}")]
pub struct RuleFileError {
    pub line: usize,
    pub reason: String,
}

/// Parses ordered `pattern,category` lines; `#` starts a comment line.
/// The category is taken after the last comma so patterns may contain commas.
pub fn parse_category_rules(input: &str) -> Result<Vec<CategoryRule>, RuleFileError> {
    let mut rules = Vec::new();
    for (idx, raw) in input.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| RuleFileError { line: idx + 1, reason };
        let (pattern, category) = line
            .rsplit_once(',')
            .ok_or_else(|| err("expected `pattern,category`".into()))?;
        let pattern = pattern.trim();
        if pattern.is_empty() {
            return Err(err("empty pattern".into()));
        }
        let category = category.trim().parse().map_err(err)?;
        rules.push(CategoryRule::new(pattern, category));
    }
    Ok(rules)
}

pub fn default_category_rules() -> Vec<CategoryRule> {
    parse_category_rules(DEFAULT_CATEGORY_RULES).expect("shipped category rules are valid")
}

pub fn categorize(sample: &ProfileSample, rules: &[CategoryRule]) -> Category {
    rules
        .iter()
        .find(|r| r.matches(sample))
        .map_or(Category::Other, |r| r.category)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Breakdown {
    pub application: f64,
    pub scientific_libraries: f64,
    pub runtime: f64,
    /// Samples above the threshold that fell into the `other` category.
    pub other: f64,
    /// Mass of all samples at or under the threshold.
    pub below_threshold_percent: f64,
}

impl Breakdown {
    pub fn get(&self, category: Category) -> f64 {
        match category {
            Category::Application => self.application,
            Category::ScientificLibraries => self.scientific_libraries,
            Category::Runtime => self.runtime,
            Category::Other => self.other,
        }
    }

    fn slot(&mut self, category: Category) -> &mut f64 {
        match category {
            Category::Application => &mut self.application,
            Category::ScientificLibraries => &mut self.scientific_libraries,
            Category::Runtime => &mut self.runtime,
            Category::Other => &mut self.other,
        }
    }

    /// The "other activities" line: categorized `other` plus everything
    /// under the threshold.
    pub fn other_activities(&self) -> f64 {
        self.other + self.below_threshold_percent
    }

    pub fn categorized_total(&self) -> f64 {
        Category::ALL.iter().map(|&c| self.get(c)).sum()
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("threshold must be a non-negative number, got {0}")]
pub struct ThresholdError(pub f64);

/// Splits a profile into category totals. Samples above `threshold_percent`
/// are assigned by the first matching rule (unmatched go to `other`);
/// the rest accumulate into `below_threshold_percent`.
pub fn breakdown(
    profile: &Profile,
    rules: &[CategoryRule],
    threshold_percent: f64,
) -> Result<Breakdown, ThresholdError> {
    if threshold_percent.is_nan() || threshold_percent < 0.0 {
        return Err(ThresholdError(threshold_percent));
    }
    let mut out = Breakdown::default();
    for sample in &profile.samples {
        if sample.percent > threshold_percent {
            *out.slot(categorize(sample, rules)) += sample.percent;
        } else {
            out.below_threshold_percent += sample.percent;
        }
    }
    Ok(out)
}

/// Anchored glob match where `*` matches any run of characters.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut backtrack: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && p[pi] == '*' {
            backtrack = Some((pi, ti));
            pi += 1;
        } else if pi < p.len() && p[pi] == t[ti] {
            pi += 1;
            ti += 1;
        } else if let Some((star, matched)) = backtrack {
            pi = star + 1;
            ti = matched + 1;
            backtrack = Some((star, matched + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}
