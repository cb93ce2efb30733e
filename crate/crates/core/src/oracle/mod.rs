//! Oracle-dependency analysis over explored paths.
//!
//! Calls to configured oracles mint taint origins. A finding is a storage
//! write, value transfer or token-call argument that carries such an origin.

mod book;
mod detect;
mod report;

pub use book::{classify_callee, AddressBook, BookError};
pub use detect::{detect_info, detect_sinks, DataFlowFinding, SinkKind};
pub use report::{
    analyze, program_id, render_report, AnalyzeError, OracleReport, ReportFormat, SourceMap, SourceMapError, Stats,
    Verdict,
};
