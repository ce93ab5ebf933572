use std::collections::BTreeSet;
use std::path::PathBuf;

use simd_advisor::advise::{AdviseError, ArchModel, default_remedies};
use simd_advisor::correlate::{attach_hotness, filter_hot, group_by_loc};
use simd_advisor::counters::{Verdict, compare_counters, parse_counters, task_time_share};
use simd_advisor::pipeline::{AdviseOptions, run_advise};
use simd_advisor::profile::{breakdown, default_category_rules, parse_category_rules, parse_profile_csv, parse_perf_report};
use simd_advisor::remark::{parse_remark_stream, remark_message};
use simd_advisor::report::{compare_runs, parse_runs, rank};
use simd_advisor::{
    BlockerCategory, Category, HotnessSource, KnowledgeBase, ParseMode, RemarkArg, RemarkKind, RemedyKind,
};

const FP_REORDER_MSG: &str = "loop not vectorized: cannot prove it is safe to reorder floating-point operations; allow reordering by specifying '#pragma clang loop vectorize(enable)' before the loop or by providing the compiler option '-ffast-math'";

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn corpus_remarks() -> Vec<simd_advisor::Remark> {
    ["vertex.opt.yaml", "walker.opt.yaml"]
        .iter()
        .flat_map(|f| parse_remark_stream(&corpus(f), ParseMode::Strict).unwrap().value)
        .collect()
}

#[test]
fn unknown_bounds_fixture_parses_to_one_missed_remark() {
    let doc = "--- !Missed\nPass: loop-vectorize\nName: UnknownArrayBounds\nFunction: f\nArgs:\n  - String: 'loop not vectorized: '\n  - String: Unknown array bounds\n...\n";
    let r = parse_remark_stream(doc, ParseMode::Strict).unwrap().value;
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].kind, RemarkKind::Missed);
    assert_eq!(r[0].message(), "loop not vectorized: Unknown array bounds");
}

#[test]
fn message_of_split_fp_reorder_args() {
    let mut r = corpus_remarks().remove(0);
    r.args = vec![
        RemarkArg::new("String", "loop not vectorized: "),
        RemarkArg::new("String", "cannot prove it is safe to reorder floating-point operations"),
        RemarkArg::new(
            "String",
            "; allow reordering by specifying '#pragma clang loop vectorize(enable)' before the loop or by providing the compiler option '-ffast-math'",
        ),
    ];
    assert_eq!(remark_message(&r), FP_REORDER_MSG);
    r.args.clear();
    assert_eq!(remark_message(&r), "");
}

#[test]
fn corpus_covers_every_category() {
    let kb = KnowledgeBase::default();
    let cats: BTreeSet<_> = corpus_remarks().iter().map(|r| kb.classify(r)).collect();
    let want: BTreeSet<_> = [
        BlockerCategory::FpReorder,
        BlockerCategory::UnknownBounds,
        BlockerCategory::Libcall,
        BlockerCategory::NoreturnExit,
        BlockerCategory::CfSelect,
        BlockerCategory::UnidentifiedBounds,
        BlockerCategory::Vectorized,
        BlockerCategory::Unknown,
    ]
    .into();
    assert_eq!(cats, want);
}

#[test]
fn classify_examples() {
    let kb = KnowledgeBase::default();
    let cases = [
        (FP_REORDER_MSG, BlockerCategory::FpReorder),
        ("loop not vectorized: Unknown array bounds", BlockerCategory::UnknownBounds),
        (
            "loop not vectorized: library call cannot be vectorized. Try compiling with -fno-math-errno, -ffast-math, or similar flags",
            BlockerCategory::Libcall,
        ),
        ("loop exit block contains control flow that does not return", BlockerCategory::NoreturnExit),
        ("loop not vectorized: control flow cannot be substituted for a select", BlockerCategory::CfSelect),
        ("loop not vectorized: cannot identify array bounds", BlockerCategory::UnidentifiedBounds),
        ("some novel diagnostic", BlockerCategory::Unknown),
    ];
    for (msg, want) in cases {
        assert_eq!(kb.classify_message(msg), want, "{msg}");
    }
}

#[test]
fn remedy_examples() {
    let fp = default_remedies(BlockerCategory::FpReorder).unwrap();
    assert!(fp[0].text.contains("omp simd reduction"));
    let lib: Vec<_> = default_remedies(BlockerCategory::Libcall).unwrap().into_iter().map(|r| r.text).collect();
    assert!(lib.iter().any(|t| t.contains("-fsimdmath")));
    assert!(lib.iter().any(|t| t.contains("-fveclib")));
    let exit = default_remedies(BlockerCategory::NoreturnExit).unwrap();
    assert!(exit.iter().any(|r| r.kind == RemedyKind::Flag && r.text.contains("NDEBUG")));
    assert_eq!(default_remedies(BlockerCategory::Vectorized), Err(AdviseError::InvalidCategory(BlockerCategory::Vectorized)));
}

#[test]
fn select_site_dedups_omp_simd() {
    let sites = group_by_loc(corpus_remarks()).sites;
    let site = sites.into_iter().find(|s| s.loc.file.ends_with("cluster_mapping.hpp")).unwrap();
    let e = KnowledgeBase::default().advise(site);
    assert_eq!(e.categories.len(), 2);
    assert_eq!(e.remedies.iter().filter(|r| r.text == "#pragma omp simd").count(), 1);
}

#[test]
fn benefit_examples() {
    let kb = KnowledgeBase::default();
    let sve = ArchModel::sve512();
    assert_eq!(kb.estimate_benefit(&BTreeSet::new(), 64, &sve).unwrap(), Some(8.0));
    let ub: BTreeSet<_> = [BlockerCategory::UnknownBounds].into();
    assert_eq!(kb.estimate_benefit(&ub, 64, &sve).unwrap(), Some(4.0));
    let both: BTreeSet<_> = [BlockerCategory::FpReorder, BlockerCategory::UnknownBounds].into();
    assert_eq!(kb.estimate_benefit(&both, 64, &ArchModel::neon128()).unwrap(), None);
}

#[test]
fn profile_examples() {
    let p = parse_profile_csv("symbol,module,percent\ndgemm_,libarmpl.so,12.5\n", "t", ParseMode::Strict).unwrap().value;
    assert_eq!(p.samples.len(), 1);
    assert_eq!((p.samples[0].symbol.as_str(), p.samples[0].percent), ("dgemm_", 12.5));
    assert!(parse_profile_csv("symbol,module,percent\nx,m,101\n", "t", ParseMode::Strict).is_err());

    let p = parse_perf_report("  12.34%  dcapp  dcapp  [.] Walker::doSweep\n", "t", ParseMode::Strict).unwrap().value;
    assert_eq!(p.samples[0].symbol, "Walker::doSweep");
    assert_eq!(p.samples[0].module, "dcapp");
    assert_eq!(p.samples[0].percent, 12.34);
    assert!(parse_perf_report("# comment\n\n", "t", ParseMode::Strict).is_err());
    assert!(parse_perf_report("# comment\n\n", "t", ParseMode::Lenient).unwrap().value.samples.is_empty());
}

#[test]
fn breakdown_fixture_26_55_9_10() {
    let mut csv = String::from("symbol,module,percent\n");
    csv += "walker_update,app,16.0\ncompute_gamma,app,10.0\n";
    csv += "dgemm_kernel,libarmpl.so,30.0\nLAPACKE_zgetrf,liblapacke.so,15.0\nfftw_execute,libfftw3.so,10.0\n";
    csv += "hpx::threads::run,libhpx.so,9.0\n";
    for i in 0..20 {
        csv += &format!("tiny_{i},app,0.5\n");
    }
    let rules = parse_category_rules(
        "dgemm*,scientific_libraries\nLAPACKE_*,scientific_libraries\nfftw_*,scientific_libraries\nhpx::*,runtime\n*,application\n",
    )
    .unwrap();
    let p = parse_profile_csv(&csv, "t", ParseMode::Strict).unwrap().value;
    let b = breakdown(&p, &rules, 1.0).unwrap();
    assert!((b.application - 26.0).abs() < 1e-9);
    assert!((b.scientific_libraries - 55.0).abs() < 1e-9);
    assert!((b.runtime - 9.0).abs() < 1e-9);
    assert!((b.other_activities() - 10.0).abs() < 1e-9);
}

#[test]
fn shipped_profiles_reproduce_application_shares() {
    for (file, want) in [("profile_neon.csv", 26.0), ("profile_sve.csv", 57.0)] {
        let p = parse_profile_csv(&corpus(file), file, ParseMode::Strict).unwrap().value;
        let b = breakdown(&p, &default_category_rules(), 1.0).unwrap();
        assert!((b.get(Category::Application) - want).abs() <= 0.01, "{file}: {}", b.application);
    }
}

#[test]
fn correlate_examples() {
    let sites = group_by_loc(corpus_remarks()).sites;
    let none = attach_hotness(
        sites
            .iter()
            .cloned()
            .map(|mut s| {
                s.remarks.iter_mut().for_each(|r| r.hotness = None);
                s
            })
            .collect(),
        None,
    )
    .value;
    assert!(none.iter().all(|s| s.hotness_source == HotnessSource::None));

    let mut two = sites[..2].to_vec();
    two[0].remarks.iter_mut().for_each(|r| r.hotness = Some(300));
    two[1].remarks.iter_mut().for_each(|r| r.hotness = Some(100));
    let two = attach_hotness(two, None).value;
    assert_eq!(two[0].hotness_percent, Some(75.0));
    assert_eq!(two[1].hotness_percent, Some(25.0));

    let mut three = sites[..3].to_vec();
    three[0].hotness_percent = Some(12.34);
    three[1].hotness_percent = Some(0.4);
    three[2].hotness_percent = None;
    let kept = filter_hot(three.clone(), 1.0, false);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].hotness_percent, Some(12.34));
    assert_eq!(filter_hot(three.clone(), 0.0, false).len(), 2);
    assert!(filter_hot(three, 100.0, false).is_empty());
}

#[test]
fn counter_examples() {
    assert!(parse_counters("label,counter,value\n").unwrap().is_empty());
    let base = parse_counters(&corpus("counters_sve_disabled.csv")).unwrap();
    let other = parse_counters(&corpus("counters_sve.csv")).unwrap();
    let obs = compare_counters(&base[0], &other[0], 0.10).unwrap();
    let get = |name: &str| obs.iter().find(|o| o.counter == name).unwrap();
    assert_eq!(get("VEC_INC").ratio, 40.0);
    assert_eq!(get("VEC_INC").verdict, Verdict::Higher);
    assert_eq!(get("L2_DCM").verdict, Verdict::Unchanged);
    assert!((task_time_share(&base).unwrap().total - 93.00).abs() < 1e-9);
    assert!((task_time_share(&other).unwrap().total - 40.14).abs() < 1e-9);
}

#[test]
fn run_examples() {
    let b = parse_runs(&corpus("runs_sve_disabled.csv")).unwrap();
    let o = parse_runs(&corpus("runs_sve.csv")).unwrap();
    let c = compare_runs(&b[0], &o[0]).unwrap();
    assert!((c.gflops_ratio.unwrap() - 78.0 / 27.0).abs() < 1e-12);
    let same = compare_runs(&b[0], &b[0]).unwrap();
    assert_eq!(same.gflops_ratio, Some(1.0));
}

#[test]
fn corpus_pipeline_ranks_hottest_first() {
    let profile = parse_perf_report(&corpus("perf.txt"), "perf.txt", ParseMode::Strict).unwrap().value;
    let out = run_advise(corpus_remarks(), Some(&profile), &KnowledgeBase::default(), &AdviseOptions::default())
        .unwrap()
        .value;
    let entries = &out.report.entries;
    assert!(entries[0].site.loc.file.ends_with("cluster_mapping.hpp"));
    assert_eq!(entries[0].site.hotness_percent, Some(25.3));
    assert_eq!(rank(entries), *entries);
    // 0.40% reset() loop falls under the 1% default.
    assert!(!entries.iter().any(|e| e.site.loc.line == 171));
    assert_eq!(out.findings, 4);
}

#[test]
fn example_config_parses() {
    let text = include_str!("../config/advisor.example.toml");
    let cfg = simd_advisor::config::Config::parse(text).unwrap();
    assert_eq!(cfg.tolerance().unwrap(), 0.10);
    let kb = cfg.knowledge_base().unwrap();
    assert_eq!(kb.classify_message("call instruction cannot be vectorized"), BlockerCategory::Libcall);
    assert_eq!(kb.remedies(BlockerCategory::NoreturnExit).unwrap().len(), 2);
}
