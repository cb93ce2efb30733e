use serde::Serialize;

use crate::sym::{CallKind, CalleeClass, MachineState, OriginId, Taint};

use super::book::AddressBook;

/// State operation reached by oracle-derived data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkKind {
    StorageWrite,
    ValueTransfer,
    CallArgument,
}

impl SinkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SinkKind::StorageWrite => "storage_write",
            SinkKind::ValueTransfer => "value_transfer",
            SinkKind::CallArgument => "call_argument",
        }
    }
}

/// One oracle-to-sink data dependency observed on an explored path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataFlowFinding {
    /// Offset of the oracle call.
    pub source_site: usize,
    pub source_kind: CallKind,
    pub origin: OriginId,
    pub sink_site: usize,
    pub sink_kind: SinkKind,
    /// Executed offsets from the source call through the sink, inclusive.
    pub witness_trace: Vec<usize>,
    /// Callee class when the sink is a call.
    pub callee_class_at_sink: Option<CalleeClass>,
}

struct SinkHit {
    site: usize,
    step: usize,
    kind: SinkKind,
    class: Option<CalleeClass>,
    taint: Taint,
    vulnerable: bool,
}

fn hits(terminal: &MachineState) -> Vec<SinkHit> {
    let mut out = Vec::new();
    for w in &terminal.storage_writes {
        out.push(SinkHit {
            site: w.site,
            step: w.step,
            kind: SinkKind::StorageWrite,
            class: None,
            taint: w.value.taint().union(w.slot.taint()),
            vulnerable: true,
        });
    }
    for c in &terminal.call_log {
        if c.value.is_tainted() {
            out.push(SinkHit {
                site: c.site,
                step: c.step,
                kind: SinkKind::ValueTransfer,
                class: Some(c.classified),
                taint: c.value.taint().clone(),
                vulnerable: true,
            });
        }
        if c.args_tainted {
            let mut taint = Taint::empty();
            for w in &c.input {
                taint.extend(w.taint());
            }
            out.push(SinkHit {
                site: c.site,
                step: c.step,
                kind: SinkKind::CallArgument,
                class: Some(c.classified),
                taint,
                // only token callees make calldata a vulnerable sink
                vulnerable: c.classified == CalleeClass::Token,
            });
        }
    }
    out
}

fn collect(terminal: &MachineState, vulnerable: bool) -> Vec<DataFlowFinding> {
    let mut out = Vec::new();
    for hit in hits(terminal).into_iter().filter(|h| h.vulnerable == vulnerable) {
        for origin in hit.taint.iter() {
            let Some(info) = terminal.origins.get(origin as usize) else { continue };
            let Some(source) = terminal.call_log.get(info.call as usize) else { continue };
            out.push(DataFlowFinding {
                source_site: info.site,
                source_kind: source.kind,
                origin,
                sink_site: hit.site,
                sink_kind: hit.kind,
                witness_trace: terminal.trace[info.step..=hit.step].to_vec(),
                callee_class_at_sink: hit.class,
            });
        }
    }
    out.sort_by_key(|f| (f.sink_site, f.origin, f.sink_kind));
    out
}

/// Oracle-dependent state updates on one explored path, ordered by
/// (sink site, origin).
///
/// A tainted SSTORE value or slot is a storage write; a tainted CALL value is
/// a value transfer; tainted calldata sent to a token callee is a call
/// argument.
pub fn detect_sinks(terminal: &MachineState, _book: &AddressBook) -> Vec<DataFlowFinding> {
    collect(terminal, true)
}

/// Tainted calldata sent to non-token callees. Reported at info level only.
pub fn detect_info(terminal: &MachineState, _book: &AddressBook) -> Vec<DataFlowFinding> {
    collect(terminal, false)
}
