//! Hardware-counter tables (PAPI-style, one set per annotated task) and
//! ratio-based comparison between two runs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::record_line;

/// Pseudo-counter carrying a task's share of total run time.
pub const TIME_PERCENT: &str = "TIME_PERCENT";

/// Default half-width of the "unchanged" band.
pub const DEFAULT_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterSet {
    pub label: String,
    pub counters: BTreeMap<String, f64>,
    pub time_percent: Option<f64>,
}

impl CounterSet {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            counters: BTreeMap::new(),
            time_percent: None,
        }
    }

    pub fn with(mut self, counter: &str, value: f64) -> Self {
        self.counters.insert(counter.to_string(), value);
        self
    }

    /// The task part of a `run/task` label, or the whole label.
    pub fn task(&self) -> &str {
        self.label.rsplit_once('/').map_or(&self.label, |(_, t)| t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Higher,
    Lower,
    Unchanged,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Higher => "higher",
            Verdict::Lower => "lower",
            Verdict::Unchanged => "unchanged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterObservation {
    pub counter: String,
    /// baseline ÷ other; infinite when only the other value is zero.
    pub ratio: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Error, PartialEq)]
pub enum CounterError {
    #[error("bad header: expected `label,counter,value`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("line {0}: negative counter value")]
    NegativeValue(usize),
    #[error("line {line}: duplicate counter `{counter}` for `{label}`")]
    DuplicateCounter { line: usize, label: String, counter: String },
    #[error("`{0}` and `{1}` share no counter names")]
    NoSharedCounters(String, String),
    #[error("tolerance must be a non-negative number, got {0}")]
    BadTolerance(f64),
    #[error("counter set `{0}` has no TIME_PERCENT")]
    MissingTimePercent(String),
}

/// Parses `label,counter,value` rows into sets grouped by label, in order of
/// first appearance. `TIME_PERCENT` rows set the task's time share.
pub fn parse_counters(input: &str) -> Result<Vec<CounterSet>, CounterError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CounterError::BadHeader(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["label", "counter", "value"] {
        return Err(CounterError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut sets: Vec<CounterSet> = Vec::new();
    for record in reader.records() {
        let rec = record.map_err(|e| CounterError::BadRow {
            line: record_line(e.position()),
            reason: e.to_string(),
        })?;
        let line = record_line(rec.position());
        let (label, counter, raw) = (&rec[0], &rec[1], &rec[2]);
        if label.is_empty() || counter.is_empty() {
            return Err(CounterError::BadRow {
                line,
                reason: "empty label or counter".into(),
            });
        }
        let value: f64 = raw.parse().map_err(|_| CounterError::BadRow {
            line,
            reason: format!("bad value `{raw}`"),
        })?;
        if value < 0.0 {
            return Err(CounterError::NegativeValue(line));
        }
        if !value.is_finite() {
            return Err(CounterError::BadRow {
                line,
                reason: format!("non-finite value `{raw}`"),
            });
        }

        let idx = match sets.iter().position(|s| s.label == label) {
            Some(i) => i,
            None => {
                sets.push(CounterSet::new(label));
                sets.len() - 1
            }
        };
        let set = &mut sets[idx];
        let duplicate = if counter == TIME_PERCENT {
            set.time_percent.replace(value).is_some()
        } else {
            set.counters.insert(counter.to_string(), value).is_some()
        };
        if duplicate {
            return Err(CounterError::DuplicateCounter {
                line,
                label: label.to_string(),
                counter: counter.to_string(),
            });
        }
    }
    Ok(sets)
}

/// Ratio `baseline ÷ other` for every shared counter, in counter-name order.
/// A ratio inside `[1/(1+tol), 1+tol]` is `Unchanged`.
pub fn compare_counters(
    baseline: &CounterSet,
    other: &CounterSet,
    tolerance: f64,
) -> Result<Vec<CounterObservation>, CounterError> {
    if tolerance.is_nan() || tolerance < 0.0 || tolerance.is_infinite() {
        return Err(CounterError::BadTolerance(tolerance));
    }
    let out: Vec<_> = baseline
        .counters
        .iter()
        .filter_map(|(name, &b)| other.counters.get(name).map(|&o| (name, b, o)))
        .map(|(name, b, o)| {
            let ratio = match (b == 0.0, o == 0.0) {
                (true, true) => 1.0,
                (false, true) => f64::INFINITY,
                _ => b / o,
            };
            CounterObservation {
                counter: name.clone(),
                ratio,
                verdict: verdict(ratio, tolerance),
            }
        })
        .collect();
    if out.is_empty() {
        return Err(CounterError::NoSharedCounters(
            baseline.label.clone(),
            other.label.clone(),
        ));
    }
    Ok(out)
}

fn verdict(ratio: f64, tolerance: f64) -> Verdict {
    let upper = 1.0 + tolerance;
    if ratio > upper {
        Verdict::Higher
    } else if ratio < 1.0 / upper {
        Verdict::Lower
    } else {
        Verdict::Unchanged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeShare {
    pub shares: Vec<(String, f64)>,
    pub total: f64,
}

/// Each set's share of run time, plus their sum.
pub fn task_time_share(sets: &[CounterSet]) -> Result<TimeShare, CounterError> {
    let shares = sets
        .iter()
        .map(|s| {
            s.time_percent
                .map(|p| (s.label.clone(), p))
                .ok_or_else(|| CounterError::MissingTimePercent(s.label.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let total = shares.iter().map(|(_, p)| p).sum();
    Ok(TimeShare { shares, total })
}
