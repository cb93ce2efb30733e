//! Independent evaluation of symbolic values and brute-force satisfiability.

use std::collections::HashMap;

use ruint::aliases::U256;
use sha3::{Digest, Keccak256};

use blockeye_core::sym::{Op, PathConstraint, SymKind, SymValue, SymbolOrigin};

use crate::interp::{word_at, ConcreteEnv, ConcreteRun};

fn bool_word(b: bool) -> U256 {
    if b {
        U256::from(1)
    } else {
        U256::ZERO
    }
}

fn shift(s: U256, v: U256, left: bool) -> U256 {
    if s >= U256::from(256) {
        return U256::ZERO;
    }
    let s = s.to::<usize>();
    if left {
        v << s
    } else {
        v >> s
    }
}

fn apply(op: Op, a: &[U256]) -> U256 {
    match op {
        Op::Add => a[0].wrapping_add(a[1]),
        Op::Mul => a[0].wrapping_mul(a[1]),
        Op::Sub => a[0].wrapping_sub(a[1]),
        Op::Div if a[1].is_zero() => U256::ZERO,
        Op::Div => a[0] / a[1],
        Op::Mod if a[1].is_zero() => U256::ZERO,
        Op::Mod => a[0] % a[1],
        Op::Exp => a[0].wrapping_pow(a[1]),
        Op::Lt => bool_word(a[0] < a[1]),
        Op::Gt => bool_word(a[0] > a[1]),
        Op::Eq => bool_word(a[0] == a[1]),
        Op::IsZero => bool_word(a[0].is_zero()),
        Op::And => a[0] & a[1],
        Op::Or => a[0] | a[1],
        Op::Xor => a[0] ^ a[1],
        Op::Not => !a[0],
        Op::Shl => shift(a[0], a[1], true),
        Op::Shr => shift(a[0], a[1], false),
        Op::Sha3 { len } => {
            let bytes: Vec<u8> = a.iter().flat_map(|w| w.to_be_bytes::<32>()).take(len as usize).collect();
            U256::from_be_slice(&Keccak256::digest(&bytes))
        }
    }
}

/// Evaluates `v` with symbols resolved by `lookup`. `None` if any symbol is
/// unresolved.
pub fn eval<F>(v: &SymValue, lookup: &F) -> Option<U256>
where
    F: Fn(u32, &SymbolOrigin) -> Option<U256>,
{
    let mut memo = HashMap::new();
    eval_memo(v, lookup, &mut memo)
}

fn eval_memo<F>(v: &SymValue, lookup: &F, memo: &mut HashMap<SymValue, Option<U256>>) -> Option<U256>
where
    F: Fn(u32, &SymbolOrigin) -> Option<U256>,
{
    if let Some(r) = memo.get(v) {
        return *r;
    }
    let r = match v.kind() {
        SymKind::Concrete(c) => Some(*c),
        SymKind::Symbol { id, origin } => lookup(*id, origin),
        SymKind::Expr { op, args } => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_memo(a, lookup, memo)?);
            }
            Some(apply(*op, &vals))
        }
    };
    memo.insert(v.clone(), r);
    r
}

/// Whether every constraint holds under `lookup`; `None` if one cannot be
/// evaluated.
pub fn all_hold<F>(constraints: &[PathConstraint], lookup: &F) -> Option<bool>
where
    F: Fn(u32, &SymbolOrigin) -> Option<U256>,
{
    let mut memo = HashMap::new();
    for c in constraints {
        let v = eval_memo(&c.value, lookup, &mut memo)?;
        if v.is_zero() == c.truth {
            return Some(false);
        }
    }
    Some(true)
}

/// Resolves symbol origins from a concrete environment and the values a
/// concrete run pushed at each step.
pub fn concrete_lookup<'a>(env: &'a ConcreteEnv, run: &'a ConcreteRun) -> impl Fn(u32, &SymbolOrigin) -> Option<U256> + 'a {
    move |_, origin| match origin {
        SymbolOrigin::CallData(off) => Some(env.calldata_word(*off)),
        SymbolOrigin::CallDataSize => Some(U256::from(env.calldata.len())),
        SymbolOrigin::CallValue => Some(env.callvalue),
        SymbolOrigin::Caller => Some(env.caller),
        SymbolOrigin::Address => Some(env.address),
        SymbolOrigin::Balance(a) => Some(env.balance(*a)),
        SymbolOrigin::Storage(s) => Some(env.initial_storage(*s)),
        SymbolOrigin::CallSuccess { call } => Some(bool_word(env.success(*call))),
        SymbolOrigin::CallOutput { call, offset } => Some(word_at(env.returned(*call), *offset)),
        SymbolOrigin::ReturnDataSize { call } => Some(U256::from(env.returned(*call).len())),
        SymbolOrigin::Havoc { step } => run.pushed.get(*step).copied().flatten(),
    }
}

fn eval_tree(v: &SymValue, assign: &[u8]) -> Option<U256> {
    match v.kind() {
        SymKind::Concrete(c) => Some(*c),
        SymKind::Symbol { id, .. } => assign.get(*id as usize).map(|b| U256::from(*b)),
        SymKind::Expr { op, args } => {
            let vals = args.iter().map(|a| eval_tree(a, assign)).collect::<Option<Vec<_>>>()?;
            Some(apply(*op, &vals))
        }
    }
}

/// Searches all assignments of symbol ids `0..n` over `0..=255`. Returns a
/// satisfying assignment if one exists. Expressions are walked as trees, so
/// keep them small.
pub fn brute_force_sat(constraints: &[PathConstraint], n: u32) -> Option<Vec<u8>> {
    let total = 256usize.pow(n);
    for k in 0..total {
        let assign: Vec<u8> = (0..n).map(|i| ((k >> (8 * i)) & 0xff) as u8).collect();
        let holds = constraints
            .iter()
            .all(|c| eval_tree(&c.value, &assign).is_some_and(|v| v.is_zero() != c.truth));
        if holds {
            return Some(assign);
        }
    }
    None
}
