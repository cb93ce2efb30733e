//! Path-constraint feasibility.
//!
//! The built-in backend is an interval evaluator over unsigned 256-bit
//! values. It narrows per-symbol ranges from comparison atoms and reports
//! `Infeasible` only when some range or constraint becomes provably empty.
//! Every narrowing step removes only values that cannot satisfy the atom it
//! came from, so a satisfiable set is never declared infeasible.

use std::collections::{BTreeMap, HashMap};

use crate::U256;

use super::state::PathConstraint;
use super::value::{Op, SymKind, SymValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Unknown,
}

/// A pluggable satisfiability check for path constraints.
pub trait FeasibilityBackend {
    fn check(&self, constraints: &[PathConstraint]) -> Feasibility;
}

/// Never prunes.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoPruning;

impl FeasibilityBackend for NoPruning {
    fn check(&self, _constraints: &[PathConstraint]) -> Feasibility {
        Feasibility::Unknown
    }
}

/// Interval and constant-propagation evaluator.
#[derive(Clone, Copy, Debug)]
pub struct IntervalSolver {
    /// Narrowing passes over the constraint list before giving up.
    pub max_rounds: usize,
}

impl Default for IntervalSolver {
    fn default() -> Self {
        IntervalSolver { max_rounds: 16 }
    }
}

impl FeasibilityBackend for IntervalSolver {
    fn check(&self, constraints: &[PathConstraint]) -> Feasibility {
        solve(constraints, self.max_rounds)
    }
}

/// Checks `constraints` with the default interval evaluator.
pub fn feasible(constraints: &[PathConstraint]) -> Feasibility {
    IntervalSolver::default().check(constraints)
}

/// Closed range `[lo, hi]`; empty when `lo > hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: U256,
    pub hi: U256,
}

impl Interval {
    pub const FULL: Interval = Interval { lo: U256::ZERO, hi: U256::MAX };
    pub const BOOL: Interval = Interval { lo: U256::ZERO, hi: U256::from_limbs([1, 0, 0, 0]) };

    pub fn point(v: U256) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn as_point(&self) -> Option<U256> {
        (self.lo == self.hi).then_some(self.lo)
    }

    pub fn contains(&self, v: U256) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.min(other.hi) }
    }

    fn truth(b: bool) -> Interval {
        Interval::point(if b { U256::from(1) } else { U256::ZERO })
    }

    /// Interval of values below `2^bits(hi)`.
    fn pow2_cover(hi: U256) -> U256 {
        let bits = hi.bit_len();
        if bits >= 256 {
            U256::MAX
        } else {
            (U256::from(1) << bits) - U256::from(1)
        }
    }
}

/// Symbol ranges keyed by symbol id.
type Env = BTreeMap<u32, Interval>;

fn symbol_range(env: &Env, id: u32) -> Interval {
    env.get(&id).copied().unwrap_or(Interval::FULL)
}

/// Over-approximates the set of values `v` can take under `env`.
pub fn eval_interval(v: &SymValue, env: &BTreeMap<u32, Interval>) -> Interval {
    let mut memo = HashMap::new();
    eval(v, env, &mut memo)
}

fn eval(v: &SymValue, env: &Env, memo: &mut HashMap<usize, Interval>) -> Interval {
    if let Some(i) = memo.get(&v.node_id()) {
        return *i;
    }
    let r = match v.kind() {
        SymKind::Concrete(c) => Interval::point(*c),
        SymKind::Symbol { id, .. } => symbol_range(env, *id),
        SymKind::Expr { op, args } => {
            let iv: Vec<Interval> = args.iter().map(|a| eval(a, env, memo)).collect();
            if iv.iter().any(Interval::is_empty) {
                Interval { lo: U256::from(1), hi: U256::ZERO }
            } else if let Some(points) = iv.iter().map(Interval::as_point).collect::<Option<Vec<_>>>() {
                Interval::point(op.apply(&points))
            } else {
                eval_op(*op, &iv)
            }
        }
    };
    memo.insert(v.node_id(), r);
    r
}

fn eval_op(op: Op, iv: &[Interval]) -> Interval {
    let one = U256::from(1);
    match op {
        Op::Add => {
            let (a, b) = (iv[0], iv[1]);
            match a.hi.checked_add(b.hi) {
                Some(hi) => Interval { lo: a.lo + b.lo, hi },
                None => Interval::FULL,
            }
        }
        Op::Sub => {
            let (a, b) = (iv[0], iv[1]);
            if a.lo >= b.hi {
                Interval { lo: a.lo - b.hi, hi: a.hi - b.lo }
            } else {
                Interval::FULL
            }
        }
        Op::Mul => {
            let (a, b) = (iv[0], iv[1]);
            match a.hi.checked_mul(b.hi) {
                Some(hi) => Interval { lo: a.lo * b.lo, hi },
                None => Interval::FULL,
            }
        }
        Op::Div => {
            let (a, b) = (iv[0], iv[1]);
            if b.lo.is_zero() {
                // x / 0 = 0 in the EVM
                Interval { lo: U256::ZERO, hi: a.hi }
            } else {
                Interval { lo: a.lo / b.hi, hi: a.hi / b.lo }
            }
        }
        Op::Mod => {
            let (a, b) = (iv[0], iv[1]);
            let mut hi = a.hi;
            if !b.lo.is_zero() {
                hi = hi.min(b.hi - one);
            }
            // x mod y <= x, and x mod 0 = 0
            let lo = if !b.lo.is_zero() && a.hi < b.lo { a.lo } else { U256::ZERO };
            Interval { lo, hi }
        }
        Op::Exp => Interval::FULL,
        Op::Lt => compare_lt(iv[0], iv[1]),
        Op::Gt => compare_lt(iv[1], iv[0]),
        Op::Eq => {
            let (a, b) = (iv[0], iv[1]);
            if a.intersect(&b).is_empty() {
                Interval::truth(false)
            } else {
                Interval::BOOL
            }
        }
        Op::IsZero => {
            let a = iv[0];
            if a.lo > U256::ZERO {
                Interval::truth(false)
            } else {
                Interval::BOOL
            }
        }
        Op::And => Interval { lo: U256::ZERO, hi: iv[0].hi.min(iv[1].hi) },
        Op::Or => Interval {
            lo: iv[0].lo.max(iv[1].lo),
            hi: Interval::pow2_cover(iv[0].hi.max(iv[1].hi)),
        },
        Op::Xor => Interval { lo: U256::ZERO, hi: Interval::pow2_cover(iv[0].hi.max(iv[1].hi)) },
        Op::Not => Interval { lo: !iv[0].hi, hi: !iv[0].lo },
        Op::Shr => {
            let (s, v) = (iv[0], iv[1]);
            match s.as_point() {
                Some(p) if p < U256::from(256) => {
                    let p = p.to::<usize>();
                    Interval { lo: v.lo >> p, hi: v.hi >> p }
                }
                Some(_) => Interval::point(U256::ZERO),
                None => Interval { lo: U256::ZERO, hi: v.hi },
            }
        }
        Op::Shl => {
            let (s, v) = (iv[0], iv[1]);
            match s.as_point() {
                Some(p) if p < U256::from(256) => {
                    let p = p.to::<usize>();
                    if v.hi.leading_zeros() >= p {
                        Interval { lo: v.lo << p, hi: v.hi << p }
                    } else {
                        Interval::FULL
                    }
                }
                Some(_) => Interval::point(U256::ZERO),
                None => Interval::FULL,
            }
        }
        Op::Sha3 { .. } => Interval::FULL,
    }
}

fn compare_lt(a: Interval, b: Interval) -> Interval {
    if a.hi < b.lo {
        Interval::truth(true)
    } else if a.lo >= b.hi {
        Interval::truth(false)
    } else {
        Interval::BOOL
    }
}

/// Narrows `env` so that `value != 0` (when `truth`) or `value == 0` holds.
/// Returns false when the atom is unsatisfiable under `env`.
fn refine(value: &SymValue, truth: bool, env: &mut Env) -> bool {
    let current = eval_interval(value, env);
    if current.is_empty() {
        return false;
    }
    if truth && current.hi.is_zero() {
        return false;
    }
    if !truth && !current.lo.is_zero() {
        return false;
    }
    match value.kind() {
        SymKind::Concrete(_) => true,
        SymKind::Symbol { id, .. } => {
            let r = symbol_range(env, *id);
            let narrowed = if truth {
                Interval { lo: r.lo.max(U256::from(1)), hi: r.hi }
            } else {
                r.intersect(&Interval::point(U256::ZERO))
            };
            set_range(env, *id, narrowed)
        }
        SymKind::Expr { op, args } => match op {
            Op::IsZero => refine(&args[0], !truth, env),
            Op::Eq => {
                if truth {
                    narrow_to(&args[0], eval_interval(&args[1], env), env)
                        && narrow_to(&args[1], eval_interval(&args[0], env), env)
                } else {
                    exclude_point(&args[0], &args[1], env) && exclude_point(&args[1], &args[0], env)
                }
            }
            Op::Lt => refine_lt(&args[0], &args[1], truth, env),
            Op::Gt => refine_lt(&args[1], &args[0], truth, env),
            _ => true,
        },
    }
}

fn set_range(env: &mut Env, id: u32, r: Interval) -> bool {
    if r.is_empty() {
        return false;
    }
    env.insert(id, r);
    true
}

/// Intersects a symbol operand's range with `range`. Non-symbol operands are
/// only checked for overlap.
fn narrow_to(operand: &SymValue, range: Interval, env: &mut Env) -> bool {
    match operand.kind() {
        SymKind::Symbol { id, .. } => {
            let r = symbol_range(env, *id).intersect(&range);
            set_range(env, *id, r)
        }
        _ => !eval_interval(operand, env).intersect(&range).is_empty(),
    }
}

/// Removes the value of `other` from `operand`'s range when `other` is a
/// single point sitting on an end of that range.
fn exclude_point(operand: &SymValue, other: &SymValue, env: &mut Env) -> bool {
    let Some(p) = eval_interval(other, env).as_point() else { return true };
    match operand.kind() {
        SymKind::Symbol { id, .. } => {
            let mut r = symbol_range(env, *id);
            if r.lo == p && r.hi == p {
                return false;
            }
            if r.lo == p {
                r.lo = p + U256::from(1);
            } else if r.hi == p {
                r.hi = p - U256::from(1);
            }
            set_range(env, *id, r)
        }
        _ => eval_interval(operand, env).as_point() != Some(p),
    }
}

/// Refines `a < b` (when `truth`) or `a >= b`.
fn refine_lt(a: &SymValue, b: &SymValue, truth: bool, env: &mut Env) -> bool {
    let ia = eval_interval(a, env);
    let ib = eval_interval(b, env);
    if truth {
        // a <= b.hi - 1 and b >= a.lo + 1
        if ib.hi.is_zero() || ia.lo == U256::MAX {
            return false;
        }
        narrow_to(a, Interval { lo: U256::ZERO, hi: ib.hi - U256::from(1) }, env)
            && narrow_to(b, Interval { lo: ia.lo + U256::from(1), hi: U256::MAX }, env)
    } else {
        // a >= b.lo and b <= a.hi
        narrow_to(a, Interval { lo: ib.lo, hi: U256::MAX }, env)
            && narrow_to(b, Interval { lo: U256::ZERO, hi: ia.hi }, env)
    }
}

fn solve(constraints: &[PathConstraint], max_rounds: usize) -> Feasibility {
    let mut env = Env::new();
    for _ in 0..max_rounds.max(1) {
        let before = env.clone();
        for c in constraints {
            if !refine(&c.value, c.truth, &mut env) {
                return Feasibility::Infeasible;
            }
        }
        if env == before {
            break;
        }
    }
    // every constraint decided true under the final ranges means a witness exists
    // only if the ranges are points; otherwise the answer stays open
    let all_points = constraints.iter().all(|c| {
        c.value.symbols().iter().all(|(id, _)| symbol_range(&env, *id).as_point().is_some())
    });
    if all_points {
        let ok = constraints.iter().all(|c| match eval_interval(&c.value, &env).as_point() {
            Some(v) => c.holds(v),
            None => false,
        });
        return if ok { Feasibility::Feasible } else { Feasibility::Infeasible };
    }
    Feasibility::Unknown
}
