//! Joins remarks into per-loop sites, attaches hotness from a flat profile or
//! from producer-embedded PGO counts, and filters down to hot code.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::Parsed;
use crate::profile::Profile;
use crate::remark::{Remark, SourceLoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HotnessSource {
    Embedded,
    Profile,
    None,
}

/// All remarks that share a `(file, line)`; the unit of advice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSite {
    /// File and line of the group; the column is taken from the first remark.
    pub loc: SourceLoc,
    pub function: String,
    pub remarks: Vec<Remark>,
    pub hotness_percent: Option<f64>,
    pub hotness_source: HotnessSource,
}

impl LoopSite {
    pub fn max_embedded_hotness(&self) -> Option<u64> {
        self.remarks.iter().filter_map(|r| r.hotness).max()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grouped {
    pub sites: Vec<LoopSite>,
    pub unlocated: Vec<Remark>,
}

/// Groups located remarks by `(file, line)`, ordered by that key. Remarks
/// without a location are returned as residue in input order.
pub fn group_by_loc(remarks: Vec<Remark>) -> Grouped {
    let mut groups: BTreeMap<(String, u32), Vec<Remark>> = BTreeMap::new();
    let mut unlocated = Vec::new();
    for remark in remarks {
        match &remark.loc {
            Some(loc) => groups
                .entry((loc.file.clone(), loc.line))
                .or_default()
                .push(remark),
            None => unlocated.push(remark),
        }
    }
    let sites = groups
        .into_values()
        .map(|remarks| {
            let first = &remarks[0];
            LoopSite {
                loc: first.loc.clone().expect("grouped remarks are located"),
                function: first.function.clone(),
                remarks,
                hotness_percent: None,
                hotness_source: HotnessSource::None,
            }
        })
        .collect();
    Grouped { sites, unlocated }
}

/// Attaches hotness to every site.
///
/// Profile samples take precedence: an exact symbol match first, then a
/// unique match on the trailing unqualified identifier. Otherwise a site's
/// largest embedded count is normalized against the sum of every site's
/// largest embedded count.
pub fn attach_hotness(mut sites: Vec<LoopSite>, profile: Option<&Profile>) -> Parsed<Vec<LoopSite>> {
    let mut warnings = Vec::new();
    let embedded_total: u128 = sites.iter().filter_map(LoopSite::max_embedded_hotness).map(u128::from).sum();

    for site in &mut sites {
        let from_profile = profile.and_then(|p| match match_symbol(p, &site.function) {
            SymbolMatch::Found(pct) => Some(pct),
            SymbolMatch::Ambiguous(candidates) => {
                warnings.push(format!(
                    "{}: function `{}` matches several profile symbols ({}); no profile hotness attached",
                    site.loc,
                    site.function,
                    candidates.join(", ")
                ));
                None
            }
            SymbolMatch::Missing => None,
        });

        (site.hotness_percent, site.hotness_source) = if let Some(pct) = from_profile {
            (Some(pct), HotnessSource::Profile)
        } else if let Some(max) = site.max_embedded_hotness() {
            let pct = if embedded_total == 0 {
                0.0
            } else {
                max as f64 / embedded_total as f64 * 100.0
            };
            (Some(pct), HotnessSource::Embedded)
        } else {
            (None, HotnessSource::None)
        };
    }
    Parsed {
        value: sites,
        warnings,
    }
}

/// Keeps sites hotter than `threshold_percent`. Sites with unknown hotness
/// survive only when `keep_unknown` is set.
pub fn filter_hot(sites: Vec<LoopSite>, threshold_percent: f64, keep_unknown: bool) -> Vec<LoopSite> {
    sites
        .into_iter()
        .filter(|s| match s.hotness_percent {
            Some(pct) => pct > threshold_percent,
            None => keep_unknown,
        })
        .collect()
}

#[derive(Debug, PartialEq)]
enum SymbolMatch {
    Found(f64),
    Ambiguous(Vec<String>),
    Missing,
}

fn match_symbol(profile: &Profile, function: &str) -> SymbolMatch {
    if let Some(s) = profile.samples.iter().find(|s| s.symbol == function) {
        return SymbolMatch::Found(s.percent);
    }
    let Some(wanted) = unqualified_name(function) else {
        return SymbolMatch::Missing;
    };
    let mut hits: Vec<(&str, f64)> = Vec::new();
    for s in &profile.samples {
        if unqualified_name(&s.symbol).as_deref() == Some(wanted.as_str())
            && !hits.iter().any(|(sym, _)| *sym == s.symbol)
        {
            hits.push((&s.symbol, s.percent));
        }
    }
    match hits.as_slice() {
        [] => SymbolMatch::Missing,
        [(_, pct)] => SymbolMatch::Found(*pct),
        many => SymbolMatch::Ambiguous(many.iter().map(|(s, _)| s.to_string()).collect()),
    }
}

/// The trailing unqualified identifier of a (possibly mangled) C++ symbol:
/// `_ZN6Walker7doSweepEv` and `void qmc::Walker<double>::doSweep(int)` both
/// give `doSweep`.
pub fn unqualified_name(symbol: &str) -> Option<String> {
    let demangled;
    let mut name = symbol.trim();
    if name.starts_with("_Z")
        && let Some(d) = cpp_demangle::BorrowedSymbol::new(name.as_bytes())
            .ok()
            .and_then(|sym| sym.demangle().ok())
    {
        demangled = d;
        name = demangled.as_str();
    }
    // Drop a trailing `(params) const`-style suffix and template arguments.
    name = strip_trailing_group(name, '(', ')');
    name = strip_trailing_group(name, '<', '>');

    let mut depth = 0i32;
    let mut start = 0;
    let bytes = name.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'<' | b'(' => depth += 1,
            b'>' | b')' => depth -= 1,
            b':' if depth == 0 && bytes.get(i + 1) == Some(&b':') => {
                start = i + 2;
                i += 1;
            }
            b' ' if depth == 0 => start = i + 1,
            _ => {}
        }
        i += 1;
    }
    let ident = name[start..].trim();
    (!ident.is_empty()).then(|| ident.to_string())
}

/// Removes the last top-level `open ... close` group and anything after it.
fn strip_trailing_group(name: &str, open: char, close: char) -> &str {
    let trimmed = name.trim_end();
    let Some(end) = trimmed.rfind(close) else {
        return trimmed;
    };
    let mut depth = 0;
    for (i, c) in trimmed[..=end].char_indices().rev() {
        if c == close {
            depth += 1;
        } else if c == open {
            depth -= 1;
            if depth == 0 {
                // `operator<` and friends keep their angle brackets.
                let head = trimmed[..i].trim_end();
                if head.is_empty() || head.ends_with("operator") {
                    return trimmed;
                }
                return head;
            }
        }
    }
    trimmed
}
