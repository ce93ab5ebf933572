//! `simd-advisor` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 input read/parse error,
//! 3 `advise --fail-on-findings` found a hot loop that did not vectorize.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use simd_advisor::advise::ArchModel;
use simd_advisor::config::Config;
use simd_advisor::counters::{CounterSet, compare_counters, parse_counters, task_time_share};
use simd_advisor::pipeline::{AdviseOptions, run_advise};
use simd_advisor::profile::{
    DEFAULT_CATEGORY_RULES, Profile, breakdown, parse_category_rules, parse_perf_report,
    parse_profile_csv,
};
use simd_advisor::remark::{RemarkSource, collect_record_files, parse_remark_sources};
use simd_advisor::report::{compare_runs, parse_runs, render_structured, render_text};
use simd_advisor::{Category, KnowledgeBase, ParseMode, Parsed};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FINDINGS: i32 = 3;

/// Environment variable naming a category rule file for `breakdown`.
pub const RULES_ENV: &str = "SIMD_ADVISOR_RULES";

#[derive(Debug, Parser)]
#[command(
    name = "simd-advisor",
    version,
    about = "Triage compiler vectorization remarks into ranked, actionable advice",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank hot loops that failed to vectorize and suggest remedies.
    Advise(AdviseArgs),
    /// Split a flat profile into application / libraries / runtime / other.
    Breakdown(BreakdownArgs),
    /// Compare hardware-counter tables of two runs.
    Counters(CountersArgs),
    /// Compare wall time and GFlops of two runs.
    Compare(CompareArgs),
    /// Classify a single remark message.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Arch {
    Sve512,
    Neon128,
}

impl Arch {
    fn model(self) -> ArchModel {
        match self {
            Arch::Sve512 => ArchModel::sve512(),
            Arch::Neon128 => ArchModel::neon128(),
        }
    }
}

#[derive(Debug, Args)]
struct AdviseArgs {
    /// Remark files (`*.opt.yaml`), directories to scan, or `-` for stdin.
    #[arg(long, num_args = 1.., required = true)]
    remarks: Vec<PathBuf>,
    /// Flat profile: `perf report` text or `symbol,module,percent` CSV.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Minimum hotness (percent of run time) a loop needs to be reported.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    /// Report loops whose hotness is unknown.
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    keep_unknown: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Architecture model for the benefit estimate.
    #[arg(long, value_enum, default_value_t = Arch::Sve512)]
    arch: Arch,
    /// Element width in bits for the benefit estimate.
    #[arg(long, default_value_t = 64, value_parser = parse_element_bits)]
    element_bits: u32,
    /// Only print the N hottest entries.
    #[arg(long)]
    top: Option<usize>,
    /// Exit with status 3 when a hot loop failed to vectorize.
    #[arg(long)]
    fail_on_findings: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct BreakdownArgs {
    #[arg(long)]
    profile: PathBuf,
    /// Category rule file (`pattern,category` lines).
    #[arg(long, env = RULES_ENV)]
    rules: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CountersArgs {
    /// Counter CSV (`label,counter,value`) of the baseline run.
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    other: PathBuf,
    /// Half-width of the "unchanged" band; overrides the config file.
    #[arg(long)]
    tolerance: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Run-summary CSV (`label,wall_seconds,gflops`) of the baseline run.
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    other: PathBuf,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    message: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config: classification rules, remedy overrides, discounts, tolerance.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip malformed input records with a warning instead of failing.
    #[arg(long)]
    lenient: bool,
}

impl Common {
    fn mode(&self) -> ParseMode {
        if self.lenient { ParseMode::Lenient } else { ParseMode::Strict }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Input(_) => EXIT_INPUT,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdin_used: bool,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        if path.as_os_str() == "-" {
            if self.stdin_used {
                return Err(Failure::Usage("`-` (stdin) may only be given once".into()));
            }
            self.stdin_used = true;
            let mut s = String::new();
            self.stdin
                .read_to_string(&mut s)
                .map_err(|e| input_err(format!("<stdin>: {e}")))?;
            return Ok(s);
        }
        std::fs::read_to_string(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
    }

    fn warn(&mut self, warnings: &[String]) {
        for w in warnings {
            let _ = writeln!(self.stderr, "warning: {w}");
        }
    }
}

fn check_paths<'p>(paths: impl IntoIterator<Item = &'p PathBuf>) -> Result<(), Failure> {
    let mut stdin_seen = false;
    for p in paths {
        if p.as_os_str() == "-" {
            if stdin_seen {
                return Err(Failure::Usage("`-` (stdin) may only be given once".into()));
            }
            stdin_seen = true;
        } else if !p.exists() {
            return Err(Failure::Input(format!("{}: no such file or directory", p.display())));
        }
    }
    Ok(())
}

/// Runs the tool with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };

    let mut io = Io {
        stdin,
        stdin_used: false,
        stderr,
    };
    let mut out = String::new();
    let result = match cli.command {
        Command::Advise(a) => advise(a, &mut io, &mut out),
        Command::Breakdown(a) => breakdown_cmd(a, &mut io, &mut out),
        Command::Counters(a) => counters_cmd(a, &mut io, &mut out),
        Command::Compare(a) => compare_cmd(a, &mut io, &mut out),
        Command::Classify(a) => classify_cmd(a, &mut io, &mut out),
    };
    let _ = stdout.write_all(out.as_bytes());
    match result {
        Ok(code) => code,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Input(m) => m,
            };
            let _ = writeln!(io.stderr, "simd-advisor: {msg}");
            if matches!(f, Failure::Usage(_)) {
                let _ = writeln!(io.stderr, "usage: simd-advisor <advise|breakdown|counters|compare|classify> [OPTIONS]");
            }
            f.code()
        }
    }
}

fn load_config(path: Option<&PathBuf>, io: &mut Io) -> Result<Config, Failure> {
    match path {
        None => Ok(Config::default()),
        Some(p) => Config::parse(&io.read(p)?).map_err(|e| input_err(format!("{}: {e}", p.display()))),
    }
}

fn knowledge_base(cfg: &Config, path: Option<&PathBuf>) -> Result<KnowledgeBase, Failure> {
    cfg.knowledge_base().map_err(|e| {
        input_err(format!(
            "{}: {e}",
            path.map_or("<config>".into(), |p| p.display().to_string())
        ))
    })
}

fn load_profile(path: &Path, io: &mut Io, mode: ParseMode) -> Result<Profile, Failure> {
    let text = io.read(path)?;
    let label = path.display().to_string();
    let is_csv = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim() == "symbol,module,percent");
    let parsed = if is_csv {
        parse_profile_csv(&text, &label, mode)
    } else {
        parse_perf_report(&text, &label, mode)
    }
    .map_err(|e| input_err(format!("{label}: {e}")))?;
    io.warn(&parsed.warnings);
    Ok(parsed.value)
}

fn advise(a: AdviseArgs, io: &mut Io, out: &mut String) -> Result<i32, Failure> {
    if a.threshold.is_nan() || a.threshold < 0.0 {
        return Err(Failure::Usage(format!("--threshold must be non-negative, got {}", a.threshold)));
    }
    check_paths(a.remarks.iter().chain(&a.profile).chain(&a.common.config))?;
    let cfg = load_config(a.common.config.as_ref(), io)?;
    let kb = knowledge_base(&cfg, a.common.config.as_ref())?;
    let mode = a.common.mode();

    let mut files = Vec::new();
    for p in &a.remarks {
        if p.as_os_str() == "-" {
            files.push(p.clone());
        } else {
            files.extend(collect_record_files(p).map_err(|e| input_err(format!("{}: {e}", p.display())))?);
        }
    }
    let mut sources = Vec::with_capacity(files.len());
    for f in &files {
        sources.push(RemarkSource {
            label: if f.as_os_str() == "-" { "<stdin>".into() } else { f.display().to_string() },
            text: io.read(f)?,
        });
    }
    let remarks = parse_remark_sources(&sources, mode).map_err(input_err)?;
    io.warn(&remarks.warnings);

    let profile = match &a.profile {
        Some(p) => Some(load_profile(p, io, mode)?),
        None => None,
    };

    let opts = AdviseOptions {
        threshold_percent: a.threshold,
        keep_unknown: a.keep_unknown,
        arch: Some(a.arch.model()),
        element_bits: a.element_bits,
        top: a.top,
        inputs: sources.iter().map(|s| s.label.clone()).chain(profile.iter().map(|p| p.source_label.clone())).collect(),
    };
    let Parsed { value: outcome, warnings } =
        run_advise(remarks.value, profile.as_ref(), &kb, &opts).map_err(|e| Failure::Usage(e.to_string()))?;
    io.warn(&warnings);

    out.push_str(&match a.format {
        Format::Text => render_text(&outcome.report),
        Format::Structured => render_structured(&outcome.report),
    });
    if a.fail_on_findings && outcome.findings > 0 {
        let _ = writeln!(
            io.stderr,
            "simd-advisor: {} hot loop(s) failed to vectorize",
            outcome.findings
        );
        return Ok(EXIT_FINDINGS);
    }
    Ok(EXIT_OK)
}

fn breakdown_cmd(a: BreakdownArgs, io: &mut Io, out: &mut String) -> Result<i32, Failure> {
    if a.threshold.is_nan() || a.threshold < 0.0 {
        return Err(Failure::Usage(format!("--threshold must be non-negative, got {}", a.threshold)));
    }
    check_paths(std::iter::once(&a.profile).chain(&a.rules))?;
    let rules_text = match &a.rules {
        Some(p) => io.read(p)?,
        None => DEFAULT_CATEGORY_RULES.to_string(),
    };
    let rules = parse_category_rules(&rules_text).map_err(|e| {
        input_err(format!(
            "{}: {e}",
            a.rules.as_ref().map_or("<default rules>".into(), |p| p.display().to_string())
        ))
    })?;
    let profile = load_profile(&a.profile, io, a.common.mode())?;
    let b = breakdown(&profile, &rules, a.threshold).map_err(|e| Failure::Usage(e.to_string()))?;

    let _ = writeln!(out, "profile: {} ({} samples, threshold {}%)", profile.source_label, profile.samples.len(), a.threshold);
    for c in [Category::Application, Category::ScientificLibraries, Category::Runtime] {
        let _ = writeln!(out, "  {:<22}{:>8.2}%", c.as_str(), b.get(c));
    }
    let _ = writeln!(out, "  {:<22}{:>8.2}%", "other activities", b.other_activities());
    let _ = writeln!(out, "    {:<20}{:>8.2}%", "other (above)", b.other);
    let _ = writeln!(out, "    {:<20}{:>8.2}%", "below threshold", b.below_threshold_percent);
    let _ = writeln!(out, "  {:<22}{:>8.2}%", "total", b.categorized_total() + b.below_threshold_percent);
    Ok(EXIT_OK)
}

/// Pairs sets from two files: directly when each has one set, otherwise by
/// the task part of the label.
fn pair_sets<'a>(base: &'a [CounterSet], other: &'a [CounterSet]) -> Vec<(&'a CounterSet, &'a CounterSet)> {
    if base.len() == 1 && other.len() == 1 {
        return vec![(&base[0], &other[0])];
    }
    base.iter()
        .filter_map(|b| other.iter().find(|o| o.task() == b.task()).map(|o| (b, o)))
        .collect()
}

fn counters_cmd(a: CountersArgs, io: &mut Io, out: &mut String) -> Result<i32, Failure> {
    check_paths([&a.baseline, &a.other].into_iter().chain(&a.common.config))?;
    let cfg = load_config(a.common.config.as_ref(), io)?;
    let tolerance = match a.tolerance {
        Some(t) if t.is_nan() || t < 0.0 || t.is_infinite() => {
            return Err(Failure::Usage(format!("--tolerance must be non-negative, got {t}")));
        }
        Some(t) => t,
        None => cfg.tolerance().map_err(input_err)?,
    };
    let read_sets = |path: &PathBuf, io: &mut Io| -> Result<Vec<CounterSet>, Failure> {
        parse_counters(&io.read(path)?).map_err(|e| input_err(format!("{}: {e}", path.display())))
    };
    let base = read_sets(&a.baseline, io)?;
    let other = read_sets(&a.other, io)?;

    let pairs = pair_sets(&base, &other);
    if pairs.is_empty() {
        return Err(Failure::Input("no counter sets could be paired between baseline and other".into()));
    }
    for b in &base {
        if !pairs.iter().any(|(pb, _)| pb.label == b.label) {
            io.warn(&[format!("baseline set `{}` has no counterpart", b.label)]);
        }
    }
    for (b, o) in pairs {
        let obs = compare_counters(b, o, tolerance).map_err(input_err)?;
        let _ = writeln!(
            out,
            "`{}` vs `{}` (ratio = baseline / other, unchanged within ±{:.0}%)",
            b.label,
            o.label,
            tolerance * 100.0
        );
        for ob in obs {
            let _ = writeln!(
                out,
                "  {:<12} baseline/other = {:>10.3}x  {}",
                ob.counter, ob.ratio, ob.verdict
            );
        }
    }
    for (name, sets) in [("baseline", &base), ("other", &other)] {
        if let Ok(share) = task_time_share(sets) {
            let parts: Vec<_> = share.shares.iter().map(|(l, p)| format!("{l} {p:.2}%")).collect();
            let _ = writeln!(out, "time share ({name}): {}; total {:.2}%", parts.join(", "), share.total);
        }
    }
    Ok(EXIT_OK)
}

fn compare_cmd(a: CompareArgs, io: &mut Io, out: &mut String) -> Result<i32, Failure> {
    check_paths([&a.baseline, &a.other])?;
    let read = |path: &PathBuf, io: &mut Io| {
        parse_runs(&io.read(path)?).map_err(|e| input_err(format!("{}: {e}", path.display())))
    };
    let base = read(&a.baseline, io)?;
    let other = read(&a.other, io)?;
    let pairs: Vec<_> = if base.len() == 1 && other.len() == 1 {
        vec![(&base[0], &other[0])]
    } else {
        base.iter()
            .filter_map(|b| other.iter().find(|o| o.label == b.label).map(|o| (b, o)))
            .collect()
    };
    if pairs.is_empty() {
        return Err(Failure::Input("no runs could be paired between baseline and other".into()));
    }
    for (b, o) in pairs {
        let c = compare_runs(b, o).map_err(input_err)?;
        let _ = writeln!(out, "`{}` vs `{}`", c.baseline_label, c.other_label);
        if let Some(s) = c.time_speedup {
            let _ = writeln!(out, "  time speedup (baseline s / other s): {s:.3}x");
        }
        if let Some(g) = c.gflops_ratio {
            let _ = writeln!(out, "  gflops ratio (other / baseline):     {g:.3}x");
        }
    }
    Ok(EXIT_OK)
}

fn classify_cmd(a: ClassifyArgs, io: &mut Io, out: &mut String) -> Result<i32, Failure> {
    check_paths(&a.common.config)?;
    let cfg = load_config(a.common.config.as_ref(), io)?;
    let kb = knowledge_base(&cfg, a.common.config.as_ref())?;
    let _ = writeln!(out, "{}", kb.classify_message(&a.message));
    Ok(EXIT_OK)
}

fn parse_element_bits(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(n @ (8 | 16 | 32 | 64)) => Ok(n),
        _ => Err(format!("`{s}` is not one of 8, 16, 32, 64")),
    }
}
