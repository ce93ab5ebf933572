//! Generators shared by the property suites and the acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::collection::{btree_set, vec};
use proptest::option;
use proptest::prelude::*;
use simd_advisor::advise::{ArchModel, DEFAULT_RULES, default_remedies};
use simd_advisor::counters::CounterSet;
use simd_advisor::report::ReportMetadata;
use simd_advisor::{
    AdviceEntry, AdviceReport, BlockerCategory, HotnessSource, LoopSite, Profile, ProfileSample,
    Remark, RemarkArg, RemarkKind, SourceLoc,
};

pub fn kind() -> impl Strategy<Value = RemarkKind> {
    prop_oneof![
        Just(RemarkKind::Passed),
        Just(RemarkKind::Missed),
        Just(RemarkKind::Analysis),
    ]
}

/// Arbitrary text including quotes, escapes, control and non-ASCII chars.
pub fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[ -~]{0,24}",
        1 => any::<String>().prop_map(|s| s.chars().take(24).collect()),
        1 => Just(String::new()),
    ]
}

pub fn nonempty_text() -> impl Strategy<Value = String> {
    text().prop_filter("non-empty", |s| !s.is_empty())
}

pub fn file_name() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z]{1,6}\\.(cpp|hpp)", "[a-z]{1,4}/[a-z_]{1,8}\\.hpp"]
}

pub fn loc() -> impl Strategy<Value = SourceLoc> {
    (file_name(), 1u32..400, 0u32..80).prop_map(|(f, l, c)| SourceLoc::new(f, l, c).unwrap())
}

pub fn arg() -> impl Strategy<Value = RemarkArg> {
    (
        "[A-Z][A-Za-z]{0,10}".prop_filter("reserved", |k| k != "DebugLoc"),
        text(),
        option::weighted(0.2, loc()),
    )
        .prop_map(|(key, value, loc)| RemarkArg { key, value, loc })
}

pub fn remark() -> impl Strategy<Value = Remark> {
    (
        kind(),
        prop_oneof![Just("loop-vectorize".to_string()), Just("slp-vectorizer".to_string()), nonempty_text()],
        nonempty_text(),
        text(),
        option::weighted(0.8, loc()),
        option::of(any::<u64>()),
        vec(arg(), 0..5),
    )
        .prop_map(|(kind, pass, name, function, loc, hotness, args)| Remark {
            kind,
            pass,
            name,
            function,
            loc,
            hotness,
            args,
        })
}

/// A message that may embed any of the default rule substrings.
pub fn message() -> impl Strategy<Value = String> {
    let needles: Vec<String> = DEFAULT_RULES.iter().map(|(s, _)| s.to_string()).collect();
    vec(
        prop_oneof![
            2 => text(),
            1 => proptest::sample::select(needles),
        ],
        0..4,
    )
    .prop_map(|parts| parts.concat())
}

pub fn blocker() -> impl Strategy<Value = BlockerCategory> {
    proptest::sample::select(BlockerCategory::ALL.to_vec())
}

pub fn blockers() -> impl Strategy<Value = BTreeSet<BlockerCategory>> {
    btree_set(blocker(), 0..4)
}

pub fn arch() -> impl Strategy<Value = ArchModel> {
    (
        proptest::sample::select(vec![128u32, 256, 512, 1024, 2048]),
        any::<bool>(),
    )
        .prop_map(|(bits, gather)| ArchModel::new(format!("arch{bits}"), bits, gather).unwrap())
}

/// Hotness values drawn from a small grid so ties occur.
pub fn hotness() -> impl Strategy<Value = Option<f64>> {
    option::weighted(0.8, prop_oneof![(0u32..20).prop_map(|n| f64::from(n) * 2.5), 0.0f64..100.0])
}

pub fn site() -> impl Strategy<Value = LoopSite> {
    (loc(), text(), vec(remark(), 1..4), hotness()).prop_map(|(loc, function, remarks, hotness_percent)| {
        let remarks = remarks
            .into_iter()
            .map(|mut r| {
                r.loc = Some(loc.clone());
                r
            })
            .collect();
        LoopSite {
            loc,
            function,
            remarks,
            hotness_source: if hotness_percent.is_some() { HotnessSource::Profile } else { HotnessSource::None },
            hotness_percent,
        }
    })
}

pub fn entry() -> impl Strategy<Value = AdviceEntry> {
    (site(), blockers(), option::of(1.0f64..64.0), any::<bool>()).prop_map(|(site, mut categories, benefit_estimate, vectorized)| {
        categories.remove(&BlockerCategory::Vectorized);
        let mut remedies = Vec::new();
        for c in &categories {
            for r in default_remedies(*c).unwrap_or_default() {
                if !remedies.contains(&r) {
                    remedies.push(r);
                }
            }
        }
        let already_vectorized = vectorized && categories.is_empty();
        AdviceEntry {
            site,
            categories,
            remedies,
            benefit_estimate,
            already_vectorized,
        }
    })
}

pub fn report() -> impl Strategy<Value = AdviceReport> {
    (
        vec(entry(), 0..5),
        vec(remark().prop_map(|mut r| {
            r.loc = None;
            r
        }), 0..3),
        vec("[a-z]{1,8}\\.opt\\.yaml", 0..3),
        0.0f64..50.0,
        any::<bool>(),
        option::of((arch(), proptest::sample::select(vec![8u32, 16, 32, 64]))),
    )
        .prop_map(|(entries, unlocated_remarks, inputs, threshold_percent, keep_unknown, arch)| AdviceReport {
            metadata: ReportMetadata {
                inputs,
                threshold_percent,
                keep_unknown,
                arch: arch.as_ref().map(|(a, _)| a.name.clone()),
                element_bits: arch.map(|(_, b)| b),
                ..ReportMetadata::default()
            },
            entries,
            unlocated_remarks,
        })
}

pub fn symbol() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z_]{1,10}",
        "(dgemm|zgemm|fftw_|cblas_|LAPACKE_)[a-z_]{0,6}",
        "(hpx::|__kmp|GOMP_)[a-z_]{1,8}",
    ]
}

pub fn module() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("app".to_string()),
        Just("libarmpl_lp64.so".to_string()),
        Just("libhpx.so.1".to_string()),
        Just("[kernel.kallsyms]".to_string()),
    ]
}

/// Profiles whose percents sum to at most 100.
pub fn profile() -> impl Strategy<Value = Profile> {
    vec((symbol(), module(), 0.0f64..1.0), 0..40).prop_map(|rows| {
        let weight: f64 = rows.iter().map(|r| r.2).sum::<f64>().max(1.0);
        Profile {
            samples: rows
                .into_iter()
                .map(|(symbol, module, w)| ProfileSample {
                    symbol,
                    module,
                    percent: w / weight * 100.0,
                })
                .collect(),
            source_label: "generated".into(),
        }
    })
}

pub fn counter_value() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 6 => 1e-3f64..1e12]
}

/// Two sets over the same counter names.
pub fn counter_pair() -> impl Strategy<Value = (CounterSet, CounterSet)> {
    proptest::collection::btree_map("[A-Z][A-Z0-9_]{1,7}", (counter_value(), counter_value()), 1..6).prop_map(|m| {
        let mut a = CounterSet::new("base/task");
        let mut b = CounterSet::new("other/task");
        for (name, (x, y)) in m {
            a = a.with(&name, x);
            b = b.with(&name, y);
        }
        (a, b)
    })
}
