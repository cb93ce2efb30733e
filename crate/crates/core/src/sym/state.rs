use std::collections::BTreeMap;
use std::fmt;

use crate::evm::Program;
use crate::U256;

use super::value::{Op, OriginId, SymValue, SymbolOrigin, Taint};

pub const STACK_LIMIT: usize = 1024;

/// Concrete facts about the calling context. Anything left `None` is symbolic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CallEnv {
    pub callvalue: Option<U256>,
    pub caller: Option<U256>,
    pub address: Option<U256>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CalleeClass {
    Oracle,
    Token,
    Unknown,
}

/// Decides how external callees are treated during exploration.
pub trait CalleeClassifier {
    fn classify(&self, callee: &SymValue) -> CalleeClass;

    /// Whether the return data of a call to this class is an oracle source.
    fn is_source(&self, class: CalleeClass) -> bool {
        class == CalleeClass::Oracle
    }
}

/// Classifies every callee as unknown; no taint sources.
impl CalleeClassifier for () {
    fn classify(&self, _callee: &SymValue) -> CalleeClass {
        CalleeClass::Unknown
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CallKind {
    Call,
    StaticCall,
    DelegateCall,
}

impl CallKind {
    pub fn name(&self) -> &'static str {
        match self {
            CallKind::Call => "call",
            CallKind::StaticCall => "staticcall",
            CallKind::DelegateCall => "delegatecall",
        }
    }
}

/// Summary of one external call made on a path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalCallRecord {
    /// Offset of the call instruction.
    pub site: usize,
    /// Position of the call in the path trace.
    pub step: usize,
    /// Zero-based index among the calls on this path.
    pub ordinal: u32,
    pub kind: CallKind,
    pub callee: SymValue,
    /// Native value forwarded; zero for STATICCALL and DELEGATECALL.
    pub value: SymValue,
    /// Calldata words read from memory.
    pub input: Vec<SymValue>,
    pub args_tainted: bool,
    pub classified: CalleeClass,
    pub returned: SymValue,
    /// Fresh origin minted when the callee is a taint source.
    pub origin: Option<OriginId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StorageWrite {
    pub site: usize,
    pub step: usize,
    pub slot: SymValue,
    pub value: SymValue,
}

/// Where and when an oracle origin was minted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OriginInfo {
    pub site: usize,
    pub step: usize,
    pub call: u32,
}

/// A path condition: `value != 0` when `truth`, `value == 0` otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathConstraint {
    pub value: SymValue,
    pub truth: bool,
}

impl PathConstraint {
    pub fn new(value: SymValue, truth: bool) -> Self {
        PathConstraint { value, truth }
    }

    pub fn holds(&self, v: U256) -> bool {
        (!v.is_zero()) == self.truth
    }
}

/// Word-granular memory or storage with havoc semantics.
///
/// `havoc` marks that a write at a symbolic key happened; from then on keys
/// missing from `words` hold unknown values carrying `stored_taint`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Region {
    pub words: BTreeMap<U256, SymValue>,
    pub havoc: bool,
    /// Union of the taint of everything ever written to the region.
    pub stored_taint: Taint,
}

impl Region {
    pub fn write(&mut self, key: U256, value: SymValue) {
        self.stored_taint.extend(value.taint());
        self.words.insert(key, value);
    }

    pub fn havoc_write(&mut self, value: &SymValue) {
        self.stored_taint.extend(value.taint());
        self.havoc = true;
        self.words.clear();
    }

    /// Forgets one word. Under havoc the word becomes unknown.
    pub fn forget(&mut self, key: U256, taint: &Taint) {
        self.stored_taint.extend(taint);
        self.words.remove(&key);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExecError {
    StackUnderflow,
    StackOverflow,
    SymbolicJumpTarget,
    InvalidJumpDest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    Depth,
    LoopBound,
}

/// Lifecycle of a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Running,
    Stop,
    Return,
    Revert,
    Error(ExecError),
    BoundCut(BoundKind),
}

impl Outcome {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Outcome::Running)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Running => f.write_str("running"),
            Outcome::Stop => f.write_str("stop"),
            Outcome::Return => f.write_str("return"),
            Outcome::Revert => f.write_str("revert"),
            Outcome::Error(e) => write!(f, "error({e:?})"),
            Outcome::BoundCut(b) => write!(f, "cut({b:?})"),
        }
    }
}

/// Symbolic machine state for one path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineState {
    pub pc: usize,
    pub stack: Vec<SymValue>,
    pub memory: Region,
    pub storage: Region,
    pub constraints: Vec<PathConstraint>,
    /// Offsets of executed instructions, in order.
    pub trace: Vec<usize>,
    pub call_log: Vec<ExternalCallRecord>,
    pub storage_writes: Vec<StorageWrite>,
    pub jumpdest_visits: BTreeMap<usize, u32>,
    pub origins: Vec<OriginInfo>,
    pub outcome: Outcome,
    /// Taint of branch conditions seen so far; only used with control taint on.
    pub control_taint: Taint,
    pub(crate) env: CallEnv,
    pub(crate) env_symbols: BTreeMap<SymbolOrigin, SymValue>,
    pub(crate) next_symbol: u32,
}

impl MachineState {
    /// Fresh state at pc 0.
    pub fn new(env: CallEnv) -> MachineState {
        MachineState {
            pc: 0,
            stack: Vec::new(),
            memory: Region::default(),
            storage: Region::default(),
            constraints: Vec::new(),
            trace: Vec::new(),
            call_log: Vec::new(),
            storage_writes: Vec::new(),
            jumpdest_visits: BTreeMap::new(),
            origins: Vec::new(),
            outcome: Outcome::Running,
            control_taint: Taint::empty(),
            env,
            env_symbols: BTreeMap::new(),
            next_symbol: 0,
        }
    }

    pub fn env(&self) -> &CallEnv {
        &self.env
    }

    pub fn top(&self) -> Option<&SymValue> {
        self.stack.last()
    }

    pub(crate) fn fresh(&mut self, origin: SymbolOrigin, taint: Taint) -> SymValue {
        let id = self.next_symbol;
        self.next_symbol += 1;
        SymValue::symbol(id, origin, taint)
    }

    /// Symbol for an environment input, shared by all reads on this path.
    pub(crate) fn env_symbol(&mut self, origin: SymbolOrigin) -> SymValue {
        if let Some(v) = self.env_symbols.get(&origin) {
            return v.clone();
        }
        let v = self.fresh(origin.clone(), Taint::empty());
        self.env_symbols.insert(origin, v.clone());
        v
    }

    /// Number of external calls made so far.
    pub fn call_count(&self) -> u32 {
        self.call_log.len() as u32
    }

    /// Reads the 32-byte memory word at a concrete byte offset.
    ///
    /// Aligned reads return the stored word; unaligned reads are spelled as an
    /// exact shift/or expression over the two overlapped words. Returns `None`
    /// when an overlapped word is unknown (havocked).
    pub(crate) fn memory_word(&self, offset: U256) -> Option<SymValue> {
        let misalign = offset.as_limbs()[0] as usize % 32;
        let base = offset - U256::from(misalign);
        let word = |key: U256| -> Option<SymValue> {
            match self.memory.words.get(&key) {
                Some(v) => Some(v.clone()),
                None if !self.memory.havoc => Some(SymValue::concrete(U256::ZERO)),
                None => None,
            }
        };
        let hi = word(base)?;
        if misalign == 0 {
            return Some(hi);
        }
        let lo = word(base.wrapping_add(U256::from(32)))?;
        let bits = misalign as u64 * 8;
        Some(SymValue::binary(
            Op::Or,
            SymValue::binary(Op::Shl, SymValue::from_u64(bits), hi),
            SymValue::binary(Op::Shr, SymValue::from_u64(256 - bits), lo),
        ))
    }

    /// Writes a 32-byte word at a concrete byte offset.
    pub(crate) fn store_memory_word(&mut self, offset: U256, value: SymValue) {
        let misalign = offset.as_limbs()[0] as usize % 32;
        if misalign == 0 {
            self.memory.write(offset, value);
            return;
        }
        let base = offset - U256::from(misalign);
        let next = base.wrapping_add(U256::from(32));
        let bits = misalign as u64 * 8;
        let keep_hi = SymValue::concrete(U256::MAX << (256 - bits as usize));
        let keep_lo = SymValue::concrete(U256::MAX >> bits as usize);
        let old_hi = self.memory_word(base);
        let old_lo = self.memory_word(next);
        match old_hi {
            Some(old) => {
                let merged = SymValue::binary(
                    Op::Or,
                    SymValue::binary(Op::And, old, keep_hi),
                    SymValue::binary(Op::Shr, SymValue::from_u64(bits), value.clone()),
                );
                self.memory.write(base, merged);
            }
            None => self.memory.forget(base, value.taint()),
        }
        match old_lo {
            Some(old) => {
                let merged = SymValue::binary(
                    Op::Or,
                    SymValue::binary(Op::And, old, keep_lo),
                    SymValue::binary(Op::Shl, SymValue::from_u64(256 - bits), value),
                );
                self.memory.write(next, merged);
            }
            None => self.memory.forget(next, value.taint()),
        }
    }
}

/// Creates the initial state for `program`.
pub fn init_state(_program: &Program, env: CallEnv) -> MachineState {
    MachineState::new(env)
}
