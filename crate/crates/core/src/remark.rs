//! Compiler optimization-remark records and the multi-document text stream
//! they are serialized in (`-fsave-optimization-record` style output).
//!
//! A stream is a sequence of documents, each introduced by a `--- !<Kind>`
//! line and optionally terminated by `...`:
//!
//! ```text
//! --- !Missed
//! Pass:            loop-vectorize
//! Name:            CantReorderFPOps
//! DebugLoc:        { File: ctint_walker.hpp, Line: 142, Column: 5 }
//! Function:        _ZN6Walker7doSweepEv
//! Hotness:         300
//! Args:
//!   - String:          'loop not vectorized: '
//!   - String:          'cannot prove it is safe to reorder floating-point operations'
//! ...
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};
use thiserror::Error;

use crate::Parsed;

/// File extension used by compilers for serialized remark files.
pub const RECORD_FILE_SUFFIX: &str = ".opt.yaml";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceLoc {
    pub file: String,
    pub line: u32,
    pub column: u32,
}

impl SourceLoc {
    /// Returns `None` when the location violates `line >= 1` or has an empty file.
    pub fn new(file: impl Into<String>, line: u32, column: u32) -> Option<Self> {
        let file = file.into();
        if file.is_empty() || line == 0 {
            return None;
        }
        Some(Self { file, line, column })
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RemarkKind {
    Passed,
    Missed,
    Analysis,
}

impl RemarkKind {
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "Passed" => Some(Self::Passed),
            "Missed" => Some(Self::Missed),
            "Analysis" => Some(Self::Analysis),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Passed => "Passed",
            Self::Missed => "Missed",
            Self::Analysis => "Analysis",
        }
    }
}

impl fmt::Display for RemarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemarkArg {
    pub key: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<SourceLoc>,
}

impl RemarkArg {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
            loc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Remark {
    pub kind: RemarkKind,
    pub pass: String,
    pub name: String,
    pub function: String,
    #[serde(default)]
    pub loc: Option<SourceLoc>,
    /// Producer-embedded PGO count. `None` means no profile data was
    /// available; `Some(0)` means the region was never sampled.
    #[serde(default)]
    pub hotness: Option<u64>,
    #[serde(default)]
    pub args: Vec<RemarkArg>,
}

impl Remark {
    /// Human-readable message: all argument values concatenated in order.
    pub fn message(&self) -> String {
        remark_message(self)
    }
}

pub fn remark_message(remark: &Remark) -> String {
    remark.args.iter().map(|a| a.value.as_str()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Abort on the first malformed document.
    #[default]
    Strict,
    /// Skip malformed documents and record a warning.
    Lenient,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RemarkError {
    #[error("malformed remark document #{index}: {reason}")]
    MalformedDocument { index: usize, reason: String },
}

/// Parses one remark stream into records, in stream order.
pub fn parse_remark_stream(input: &str, mode: ParseMode) -> Result<Parsed<Vec<Remark>>, RemarkError> {
    let mut out = Parsed::<Vec<Remark>>::default();
    for (index, doc) in split_documents(input).into_iter().enumerate() {
        match parse_document(&doc) {
            Ok(DocOutcome::Remark(remark, warnings)) => {
                out.warnings
                    .extend(warnings.into_iter().map(|w| format!("document #{index}: {w}")));
                out.value.push(remark);
            }
            Ok(DocOutcome::UnknownTag(tag)) => {
                out.warnings
                    .push(format!("document #{index}: skipping unknown remark kind `!{tag}`"));
            }
            Err(reason) => match mode {
                ParseMode::Strict => return Err(RemarkError::MalformedDocument { index, reason }),
                ParseMode::Lenient => out
                    .warnings
                    .push(format!("document #{index}: skipped malformed document: {reason}")),
            },
        }
    }
    Ok(out)
}

/// A named input, typically a file path paired with its contents.
#[derive(Debug, Clone)]
pub struct RemarkSource {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Error)]
#[error("{label}: {source}")]
pub struct SourceError {
    pub label: String,
    #[source]
    pub source: RemarkError,
}

/// Parses several streams and concatenates their remarks in argument order.
/// Streams are parsed on separate threads.
pub fn parse_remark_sources(
    sources: &[RemarkSource],
    mode: ParseMode,
) -> Result<Parsed<Vec<Remark>>, SourceError> {
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = sources
            .iter()
            .map(|s| scope.spawn(move || parse_remark_stream(&s.text, mode)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("remark parser thread panicked"))
            .collect()
    });

    let mut merged = Parsed::<Vec<Remark>>::default();
    for (source, result) in sources.iter().zip(results) {
        let parsed = result.map_err(|e| SourceError {
            label: source.label.clone(),
            source: e,
        })?;
        merged.value.extend(parsed.value);
        merged
            .warnings
            .extend(parsed.warnings.into_iter().map(|w| format!("{}: {w}", source.label)));
    }
    Ok(merged)
}

/// Expands a directory into the remark record files beneath it, sorted by
/// path. Plain files are returned unchanged.
pub fn collect_record_files(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut found = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(RECORD_FILE_SUFFIX))
            {
                found.push(p);
            }
        }
    }
    found.sort();
    Ok(found)
}

struct RawDocument {
    tag: Option<String>,
    body: String,
}

enum DocOutcome {
    Remark(Remark, Vec<String>),
    UnknownTag(String),
}

fn split_documents(input: &str) -> Vec<RawDocument> {
    let mut docs = Vec::new();
    let mut current: Option<RawDocument> = None;
    for line in input.lines() {
        if let Some(rest) = line.strip_prefix("---")
            && (rest.is_empty() || rest.starts_with([' ', '\t']))
        {
            docs.extend(current.take());
            let tag = rest
                .trim()
                .strip_prefix('!')
                .map(|t| t.split_whitespace().next().unwrap_or("").to_string());
            current = Some(RawDocument {
                tag,
                body: String::new(),
            });
            continue;
        }
        if line.trim_end() == "..." {
            docs.extend(current.take());
            continue;
        }
        match current.as_mut() {
            Some(doc) => {
                doc.body.push_str(line);
                doc.body.push('\n');
            }
            None if line.trim().is_empty() || line.trim_start().starts_with('#') => {}
            None => {
                // Content outside any `---` document: treat as an untagged document.
                current = Some(RawDocument {
                    tag: None,
                    body: format!("{line}\n"),
                });
            }
        }
    }
    docs.extend(current);
    docs
}

fn parse_document(doc: &RawDocument) -> Result<DocOutcome, String> {
    let tag = doc.tag.as_deref().ok_or("missing remark kind tag")?;
    let Some(kind) = RemarkKind::from_tag(tag) else {
        return Ok(DocOutcome::UnknownTag(tag.to_string()));
    };
    let value: Value = serde_yaml::from_str(&doc.body).map_err(|e| e.to_string())?;
    let map = value.as_mapping().ok_or("document body is not a mapping")?;
    let mut warnings = Vec::new();

    let pass = required_string(map, "Pass")?;
    let name = required_string(map, "Name")?;
    let function = required_string(map, "Function")?;

    let loc = match map.get("DebugLoc") {
        None | Some(Value::Null) => None,
        Some(v) => parse_debug_loc(v, &mut warnings)?,
    };

    let hotness = match map.get("Hotness") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => Some(n.as_u64().ok_or_else(|| format!("Hotness `{n}` is not a non-negative integer"))?),
        Some(other) => return Err(format!("Hotness must be an integer, found {}", describe(other))),
    };

    let args = match map.get("Args") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Sequence(seq)) => seq
            .iter()
            .enumerate()
            .map(|(i, a)| parse_arg(a, &mut warnings).map_err(|e| format!("Args[{i}]: {e}")))
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(format!("Args must be a sequence, found {}", describe(other))),
    };

    Ok(DocOutcome::Remark(
        Remark {
            kind,
            pass,
            name,
            function,
            loc,
            hotness,
            args,
        },
        warnings,
    ))
}

fn required_string(map: &Mapping, key: &str) -> Result<String, String> {
    let value = map.get(key).ok_or_else(|| format!("missing `{key}`"))?;
    let text = scalar_text(value).ok_or_else(|| format!("`{key}` must be a scalar, found {}", describe(value)))?;
    if text.is_empty() && key != "Function" {
        return Err(format!("`{key}` is empty"));
    }
    Ok(text)
}

/// Canonical text of a scalar; non-string scalars render as decimal text.
fn scalar_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Null => Some(String::new()),
        Value::Tagged(t) => scalar_text(&t.value),
        Value::Sequence(_) | Value::Mapping(_) => None,
    }
}

fn parse_debug_loc(value: &Value, warnings: &mut Vec<String>) -> Result<Option<SourceLoc>, String> {
    let map = value.as_mapping().ok_or("DebugLoc must be a mapping")?;
    let file = required_string(map, "File")?;
    let line = loc_number(map, "Line")?;
    let column = match map.get("Column") {
        None => 0,
        Some(_) => loc_number(map, "Column")?,
    };
    let loc = SourceLoc::new(file.clone(), line, column);
    if loc.is_none() {
        warnings.push(format!("ignoring unusable DebugLoc `{file}:{line}:{column}`"));
    }
    Ok(loc)
}

fn loc_number(map: &Mapping, key: &str) -> Result<u32, String> {
    let v = map.get(key).ok_or_else(|| format!("DebugLoc missing `{key}`"))?;
    let n = match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    };
    n.and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| format!("DebugLoc `{key}` is not a non-negative integer"))
}

fn parse_arg(value: &Value, warnings: &mut Vec<String>) -> Result<RemarkArg, String> {
    let map = value.as_mapping().ok_or("argument must be a mapping")?;
    let mut key_value = None;
    let mut loc = None;
    for (k, v) in map {
        let k = k.as_str().ok_or("argument key must be a string")?;
        if k == "DebugLoc" {
            loc = parse_debug_loc(v, warnings)?;
            continue;
        }
        if key_value.is_some() {
            return Err("argument has more than one key".into());
        }
        if k.is_empty() {
            return Err("argument key is empty".into());
        }
        let text = scalar_text(v).ok_or_else(|| format!("argument `{k}` must be a scalar"))?;
        key_value = Some((k.to_string(), text));
    }
    let (key, value) = key_value.ok_or("argument has no key")?;
    Ok(RemarkArg { key, value, loc })
}

fn describe(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Sequence(_) => "a sequence",
        Value::Mapping(_) => "a mapping",
        Value::Tagged(_) => "a tagged value",
    }
}

/// Serializes remarks back into the stream format accepted by
/// [`parse_remark_stream`]. All strings are emitted double-quoted.
pub fn write_remark_stream(remarks: &[Remark]) -> String {
    let mut out = String::new();
    for r in remarks {
        out.push_str("--- !");
        out.push_str(r.kind.tag());
        out.push('\n');
        out.push_str(&format!("Pass:            {}\n", quote(&r.pass)));
        out.push_str(&format!("Name:            {}\n", quote(&r.name)));
        if let Some(loc) = &r.loc {
            out.push_str(&format!("DebugLoc:        {}\n", flow_loc(loc)));
        }
        out.push_str(&format!("Function:        {}\n", quote(&r.function)));
        if let Some(h) = r.hotness {
            out.push_str(&format!("Hotness:         {h}\n"));
        }
        if r.args.is_empty() {
            out.push_str("Args:            []\n");
        } else {
            out.push_str("Args:\n");
            for a in &r.args {
                out.push_str(&format!("  - {}: {}\n", quote(&a.key), quote(&a.value)));
                if let Some(loc) = &a.loc {
                    out.push_str(&format!("    DebugLoc: {}\n", flow_loc(loc)));
                }
            }
        }
        out.push_str("...\n");
    }
    out
}

fn flow_loc(loc: &SourceLoc) -> String {
    format!(
        "{{ File: {}, Line: {}, Column: {} }}",
        quote(&loc.file),
        loc.line,
        loc.column
    )
}

/// YAML double-quoted scalar, escaping everything outside the printable set.
fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if is_yaml_printable(c) => out.push(c),
            c if (c as u32) <= 0xFFFF => out.push_str(&format!("\\u{:04X}", c as u32)),
            c => out.push_str(&format!("\\U{:08X}", c as u32)),
        }
    }
    out.push('"');
    out
}

fn is_yaml_printable(c: char) -> bool {
    matches!(c as u32, 0x20..=0x7E | 0xA0..=0xD7FF | 0x10000..=0x10FFFF)
        || (matches!(c as u32, 0xE000..=0xFFFD) && c != '\u{FEFF}')
}
