use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use sha3::{Digest, Keccak256};

use crate::U256;

/// Identifies one oracle call occurrence on a path.
pub type OriginId = u32;

/// Set of oracle origins that influenced a value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Taint(BTreeSet<OriginId>);

impl Taint {
    pub fn empty() -> Self {
        Taint(BTreeSet::new())
    }

    pub fn single(origin: OriginId) -> Self {
        Taint(BTreeSet::from([origin]))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, origin: OriginId) -> bool {
        self.0.contains(&origin)
    }

    pub fn iter(&self) -> impl Iterator<Item = OriginId> + '_ {
        self.0.iter().copied()
    }

    pub fn insert(&mut self, origin: OriginId) {
        self.0.insert(origin);
    }

    pub fn extend(&mut self, other: &Taint) {
        self.0.extend(other.0.iter().copied());
    }

    pub fn union(&self, other: &Taint) -> Taint {
        let mut t = self.clone();
        t.extend(other);
        t
    }

    pub fn is_superset(&self, other: &Taint) -> bool {
        self.0.is_superset(&other.0)
    }
}

impl FromIterator<OriginId> for Taint {
    fn from_iter<I: IntoIterator<Item = OriginId>>(iter: I) -> Self {
        Taint(iter.into_iter().collect())
    }
}

/// Where a symbol came from. Environment-derived origins are cached per path,
/// so two reads of the same input yield the same symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolOrigin {
    /// 32-byte calldata word at a concrete byte offset.
    CallData(U256),
    CallDataSize,
    CallValue,
    Caller,
    Address,
    /// Balance of a concrete address.
    Balance(U256),
    /// Pre-transaction value of a concrete storage slot.
    Storage(U256),
    /// Success flag pushed by the n-th external call on the path.
    CallSuccess { call: u32 },
    /// 32-byte word of the n-th call's return data starting at a byte offset.
    CallOutput { call: u32, offset: U256 },
    ReturnDataSize { call: u32 },
    /// Unconstrained value produced by the instruction at trace position `step`
    /// (loads from havocked regions, symbolic-offset reads).
    Havoc { step: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Mul,
    Sub,
    Div,
    Mod,
    Exp,
    Lt,
    Gt,
    Eq,
    IsZero,
    And,
    Or,
    Xor,
    Not,
    Shl,
    Shr,
    /// Keccak-256 over `len` bytes spelled by the operand words (big-endian,
    /// truncated to `len`). Operand count is `ceil(len / 32)`.
    Sha3 { len: u32 },
}

impl Op {
    pub fn arity(&self) -> usize {
        match self {
            Op::IsZero | Op::Not => 1,
            Op::Sha3 { len } => (*len as usize).div_ceil(32),
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Op::Add => "ADD",
            Op::Mul => "MUL",
            Op::Sub => "SUB",
            Op::Div => "DIV",
            Op::Mod => "MOD",
            Op::Exp => "EXP",
            Op::Lt => "LT",
            Op::Gt => "GT",
            Op::Eq => "EQ",
            Op::IsZero => "ISZERO",
            Op::And => "AND",
            Op::Or => "OR",
            Op::Xor => "XOR",
            Op::Not => "NOT",
            Op::Shl => "SHL",
            Op::Shr => "SHR",
            Op::Sha3 { .. } => "SHA3",
        }
    }

    /// Concrete semantics. Operand order follows the EVM pop order
    /// (first operand was on top of the stack).
    pub fn apply(&self, args: &[U256]) -> U256 {
        let bool_word = |b: bool| if b { U256::from(1) } else { U256::ZERO };
        match self {
            Op::Add => args[0].wrapping_add(args[1]),
            Op::Mul => args[0].wrapping_mul(args[1]),
            Op::Sub => args[0].wrapping_sub(args[1]),
            Op::Div => args[0].checked_div(args[1]).unwrap_or(U256::ZERO),
            Op::Mod => args[0].checked_rem(args[1]).unwrap_or(U256::ZERO),
            Op::Exp => args[0].wrapping_pow(args[1]),
            Op::Lt => bool_word(args[0] < args[1]),
            Op::Gt => bool_word(args[0] > args[1]),
            Op::Eq => bool_word(args[0] == args[1]),
            Op::IsZero => bool_word(args[0].is_zero()),
            Op::And => args[0] & args[1],
            Op::Or => args[0] | args[1],
            Op::Xor => args[0] ^ args[1],
            Op::Not => !args[0],
            Op::Shl => shift_amount(args[0]).map_or(U256::ZERO, |s| args[1] << s),
            Op::Shr => shift_amount(args[0]).map_or(U256::ZERO, |s| args[1] >> s),
            Op::Sha3 { len } => {
                let mut bytes = Vec::with_capacity(args.len() * 32);
                for w in args {
                    bytes.extend_from_slice(&w.to_be_bytes::<32>());
                }
                bytes.truncate(*len as usize);
                keccak_word(&bytes)
            }
        }
    }
}

fn shift_amount(v: U256) -> Option<usize> {
    if v < U256::from(256) {
        Some(v.to::<usize>())
    } else {
        None
    }
}

/// Keccak-256 of `bytes` as a word.
pub fn keccak_word(bytes: &[u8]) -> U256 {
    let digest: [u8; 32] = Keccak256::digest(bytes).into();
    U256::from_be_bytes(digest)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SymKind {
    Concrete(U256),
    Symbol { id: u32, origin: SymbolOrigin },
    Expr { op: Op, args: Vec<SymValue> },
}

#[derive(Debug)]
struct Node {
    kind: SymKind,
    taint: Taint,
    hash: u64,
}

/// A 256-bit concrete-or-symbolic value with its oracle taint.
///
/// Cheap to clone. Structural hashing is cached per node, so values built as
/// large shared DAGs hash in constant time.
#[derive(Clone)]
pub struct SymValue(Arc<Node>);

impl SymValue {
    fn new(kind: SymKind, taint: Taint) -> SymValue {
        let mut h = DefaultHasher::new();
        match &kind {
            SymKind::Concrete(v) => (0u8, v).hash(&mut h),
            SymKind::Symbol { id, origin } => (1u8, id, origin).hash(&mut h),
            SymKind::Expr { op, args } => {
                (2u8, op).hash(&mut h);
                for a in args {
                    a.0.hash.hash(&mut h);
                }
            }
        }
        taint.hash(&mut h);
        SymValue(Arc::new(Node { kind, taint, hash: h.finish() }))
    }

    pub fn concrete(v: U256) -> SymValue {
        SymValue::new(SymKind::Concrete(v), Taint::empty())
    }

    pub fn concrete_tainted(v: U256, taint: Taint) -> SymValue {
        SymValue::new(SymKind::Concrete(v), taint)
    }

    pub fn from_u64(v: u64) -> SymValue {
        SymValue::concrete(U256::from(v))
    }

    pub fn symbol(id: u32, origin: SymbolOrigin, taint: Taint) -> SymValue {
        SymValue::new(SymKind::Symbol { id, origin }, taint)
    }

    /// Builds `op(args)`, folding to a concrete value when every operand is
    /// concrete. The result's taint is the union of the operand taints.
    pub fn expr(op: Op, args: Vec<SymValue>) -> SymValue {
        assert_eq!(args.len(), op.arity(), "arity mismatch for {}", op.name());
        let mut taint = Taint::empty();
        for a in &args {
            taint.extend(a.taint());
        }
        let concrete: Option<Vec<U256>> = args.iter().map(|a| a.as_concrete()).collect();
        match concrete {
            Some(vals) => SymValue::new(SymKind::Concrete(op.apply(&vals)), taint),
            None => SymValue::new(SymKind::Expr { op, args }, taint),
        }
    }

    pub fn unary(op: Op, a: SymValue) -> SymValue {
        SymValue::expr(op, vec![a])
    }

    pub fn binary(op: Op, a: SymValue, b: SymValue) -> SymValue {
        SymValue::expr(op, vec![a, b])
    }

    /// Same value with `extra` added to its taint.
    pub fn with_taint(&self, extra: &Taint) -> SymValue {
        if self.taint().is_superset(extra) {
            return self.clone();
        }
        SymValue::new(self.0.kind.clone(), self.taint().union(extra))
    }

    pub fn kind(&self) -> &SymKind {
        &self.0.kind
    }

    pub fn taint(&self) -> &Taint {
        &self.0.taint
    }

    pub fn is_tainted(&self) -> bool {
        !self.0.taint.is_empty()
    }

    pub fn as_concrete(&self) -> Option<U256> {
        match self.0.kind {
            SymKind::Concrete(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_concrete(&self) -> bool {
        self.as_concrete().is_some()
    }

    /// Pointer identity, used as a memoization key.
    pub(crate) fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Evaluates the value under an assignment of its symbols.
    ///
    /// Returns `None` when `lookup` cannot supply some symbol.
    pub fn evaluate<F>(&self, lookup: &F) -> Option<U256>
    where
        F: Fn(u32, &SymbolOrigin) -> Option<U256>,
    {
        let mut memo = HashMap::new();
        self.eval_memo(lookup, &mut memo)
    }

    fn eval_memo<F>(&self, lookup: &F, memo: &mut HashMap<usize, U256>) -> Option<U256>
    where
        F: Fn(u32, &SymbolOrigin) -> Option<U256>,
    {
        if let Some(v) = memo.get(&self.node_id()) {
            return Some(*v);
        }
        let v = match &self.0.kind {
            SymKind::Concrete(v) => *v,
            SymKind::Symbol { id, origin } => lookup(*id, origin)?,
            SymKind::Expr { op, args } => {
                let vals = args
                    .iter()
                    .map(|a| a.eval_memo(lookup, memo))
                    .collect::<Option<Vec<_>>>()?;
                op.apply(&vals)
            }
        };
        memo.insert(self.node_id(), v);
        Some(v)
    }

    /// Distinct symbols occurring in the value, in first-visit order.
    pub fn symbols(&self) -> Vec<(u32, SymbolOrigin)> {
        let mut seen_nodes = std::collections::HashSet::new();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut work = vec![self.clone()];
        while let Some(v) = work.pop() {
            if !seen_nodes.insert(v.node_id()) {
                continue;
            }
            match v.kind() {
                SymKind::Concrete(_) => {}
                SymKind::Symbol { id, origin } => {
                    if seen.insert(*id) {
                        out.push((*id, origin.clone()));
                    }
                }
                SymKind::Expr { args, .. } => work.extend(args.iter().rev().cloned()),
            }
        }
        out
    }
}

impl PartialEq for SymValue {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash && self.0.taint == other.0.taint && self.0.kind == other.0.kind)
    }
}

impl Eq for SymValue {}

impl Hash for SymValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state);
    }
}

impl fmt::Debug for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)?;
        if self.is_tainted() {
            write!(f, " {{taint {:?}}}", self.0.taint.0)?;
        }
        Ok(())
    }
}

impl fmt::Display for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            SymKind::Concrete(v) => write!(f, "{v:#x}"),
            SymKind::Symbol { id, .. } => write!(f, "s{id}"),
            SymKind::Expr { op, args } => {
                write!(f, "{}(", op.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    fmt::Display::fmt(a, f)?;
                }
                f.write_str(")")
            }
        }
    }
}
