use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::evm::{disassemble, DecodeError};
use crate::sym::{explore, ConfigError, ExploreConfig};
use crate::U256;

use super::book::AddressBook;
use super::detect::{detect_info, detect_sinks, DataFlowFinding};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Vulnerable,
    NotFound,
    /// No finding, but this many paths were cut by a bound.
    Inconclusive(usize),
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Vulnerable => "vulnerable",
            Verdict::NotFound => "not_found",
            Verdict::Inconclusive(_) => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    /// Terminal states reached.
    pub paths: usize,
    pub cuts: usize,
    pub pruned: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    /// Lowercase hex keccak-256 of the bytecode.
    pub program_id: String,
    pub verdict: Verdict,
    pub findings: Vec<DataFlowFinding>,
    /// Tainted calldata sent to callees that are not configured tokens.
    pub info: Vec<DataFlowFinding>,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzeError {
    #[error("decode failed: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

type DedupKey = (usize, usize, super::detect::SinkKind);

fn key(f: &DataFlowFinding) -> DedupKey {
    (f.source_site, f.sink_site, f.sink_kind)
}

fn insert_shortest(map: &mut BTreeMap<DedupKey, DataFlowFinding>, f: DataFlowFinding) {
    match map.get(&key(&f)) {
        Some(old) if (old.witness_trace.len(), &old.witness_trace) <= (f.witness_trace.len(), &f.witness_trace) => {}
        _ => {
            map.insert(key(&f), f);
        }
    }
}

fn ordered(map: BTreeMap<DedupKey, DataFlowFinding>) -> Vec<DataFlowFinding> {
    let mut v: Vec<_> = map.into_values().collect();
    v.sort_by_key(|f| (f.sink_site, f.source_site, f.sink_kind));
    v
}

/// Explores `bytecode` and collects oracle-dependent state updates.
///
/// Findings identical in (source site, sink site, sink kind) are merged,
/// keeping the shortest witness.
pub fn analyze(bytecode: &[u8], book: &AddressBook, config: &ExploreConfig) -> Result<OracleReport, AnalyzeError> {
    config.validate()?;
    let program = disassemble(bytecode)?;
    let ex = explore(&program, config, book);

    let mut findings = BTreeMap::new();
    let mut info = BTreeMap::new();
    for t in &ex.terminals {
        for f in detect_sinks(t, book) {
            insert_shortest(&mut findings, f);
        }
        for f in detect_info(t, book) {
            insert_shortest(&mut info, f);
        }
    }
    let findings = ordered(findings);
    let cuts = ex.cuts();
    let verdict = if !findings.is_empty() {
        Verdict::Vulnerable
    } else if cuts > 0 {
        Verdict::Inconclusive(cuts)
    } else {
        Verdict::NotFound
    };
    Ok(OracleReport {
        program_id: program_id(bytecode),
        verdict,
        findings,
        info: ordered(info),
        stats: Stats { paths: ex.terminals.len(), cuts, pruned: ex.pruned },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Error)]
pub enum SourceMapError {
    #[error("source map is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("source map key {0:?} is not a byte offset")]
    Key(String),
}

/// Offset-to-line annotations. A site maps to the line of the greatest mapped
/// offset not above it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceMap(BTreeMap<usize, u64>);

impl SourceMap {
    pub fn new(entries: impl IntoIterator<Item = (usize, u64)>) -> Self {
        SourceMap(entries.into_iter().collect())
    }

    /// Parses `{"<offset>": line, ...}`.
    pub fn from_json(text: &str) -> Result<Self, SourceMapError> {
        let raw: BTreeMap<String, u64> = serde_json::from_str(text)?;
        let mut out = BTreeMap::new();
        for (k, line) in raw {
            let off = k.parse().map_err(|_| SourceMapError::Key(k.clone()))?;
            out.insert(off, line);
        }
        Ok(SourceMap(out))
    }

    pub fn line(&self, site: usize) -> Option<u64> {
        self.0.range(..=site).next_back().map(|(_, l)| *l)
    }
}

fn finding_json(f: &DataFlowFinding, map: Option<&SourceMap>) -> Value {
    let mut v = json!({
        "source_site": f.source_site,
        "sink_site": f.sink_site,
        "sink_kind": f.sink_kind.as_str(),
        "origin": f.origin,
        "trace": f.witness_trace,
        "source_op": f.source_kind.name(),
    });
    if let Some(map) = map {
        v["source_line"] = json!(map.line(f.source_site));
        v["sink_line"] = json!(map.line(f.sink_site));
    }
    v
}

/// Serializes a report. Output depends only on the report and map.
pub fn render_report(report: &OracleReport, format: ReportFormat, map: Option<&SourceMap>) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let v = json!({
                "program_id": report.program_id,
                "verdict": report.verdict.as_str(),
                "findings": report.findings.iter().map(|f| finding_json(f, map)).collect::<Vec<_>>(),
                "info": report.info.iter().map(|f| finding_json(f, map)).collect::<Vec<_>>(),
                "stats": {"paths": report.stats.paths, "cuts": report.stats.cuts},
            });
            let mut out = serde_json::to_vec_pretty(&v).expect("report values serialize");
            out.push(b'\n');
            out
        }
        ReportFormat::Text => render_text(report, map).into_bytes(),
    }
}

fn site(s: usize, map: Option<&SourceMap>) -> String {
    match map.and_then(|m| m.line(s)) {
        Some(line) => format!("{s:#06x} (line {line})"),
        None => format!("{s:#06x}"),
    }
}

fn render_text(report: &OracleReport, map: Option<&SourceMap>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "program  {}", report.program_id);
    let _ = match report.verdict {
        Verdict::Inconclusive(n) => writeln!(s, "verdict  inconclusive ({n} cut paths)"),
        v => writeln!(s, "verdict  {}", v.as_str()),
    };
    let _ = writeln!(s, "paths    {} explored, {} cut", report.stats.paths, report.stats.cuts);
    for (title, list) in [("finding", &report.findings), ("info", &report.info)] {
        for f in list {
            let _ = writeln!(
                s,
                "{title}  {} {} -> {} {}",
                f.source_kind.name(),
                site(f.source_site, map),
                f.sink_kind.as_str(),
                site(f.sink_site, map),
            );
            let trace: Vec<String> = f.witness_trace.iter().map(|o| o.to_string()).collect();
            let _ = writeln!(s, "    trace {}", trace.join(" "));
        }
    }
    s
}

/// Lowercase hex keccak-256 of `bytecode`.
pub fn program_id(bytecode: &[u8]) -> String {
    let w: U256 = crate::sym::keccak_word(bytecode);
    hex::encode(w.to_be_bytes::<32>())
}
