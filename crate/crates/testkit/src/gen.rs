//! Random program, input and constraint generators.

use rand::seq::SliceRandom;
use rand::Rng;
use ruint::aliases::U256;

use blockeye_core::sym::{Op, PathConstraint, SymValue, SymbolOrigin, Taint};

use crate::interp::ConcreteEnv;

/// Opcodes emitted as-is, on whatever the stack holds.
const PLAIN: &[u8] = &[
    0x01, 0x02, 0x03, 0x04, 0x06, 0x0a, 0x10, 0x11, 0x14, 0x15, 0x16, 0x17, 0x18, 0x19, 0x1b, 0x1c, // arithmetic
    0x30, 0x33, 0x34, 0x36, 0x3d, 0x50, 0x58, 0x80, 0x81, 0x82, 0x90, 0x91, 0x54,
];

struct Builder {
    code: Vec<u8>,
    /// (position of PUSH2 immediate, target label)
    fixups: Vec<(usize, usize)>,
    labels: Vec<usize>,
    depth: usize,
}

impl Builder {
    fn push1(&mut self, v: u8) {
        self.code.extend([0x60, v]);
        self.depth += 1;
    }

    fn op(&mut self, b: u8, pops: usize, pushes: usize) {
        self.code.push(b);
        self.depth = self.depth.saturating_sub(pops) + pushes;
    }

    fn jump_to(&mut self, label: usize, op: u8) {
        self.code.push(0x61);
        self.fixups.push((self.code.len(), label));
        self.code.extend([0, 0]);
        self.code.push(op);
        self.depth = self.depth.saturating_sub(if op == 0x57 { 1 } else { 0 });
    }
}

fn small<R: Rng>(rng: &mut R) -> u8 {
    *[0u8, 1, 2, 3, 5, 0x20, 0x40, 0xff].choose(rng).unwrap()
}

fn emit_random<R: Rng>(rng: &mut R, b: &mut Builder) {
    match rng.gen_range(0..100) {
        0..=29 => b.push1(small(rng)),
        30..=39 => {
            // calldata word at a small offset
            b.push1(*[0u8, 0x20, 0x40].choose(rng).unwrap());
            b.op(0x35, 1, 1);
        }
        40..=44 => {
            b.push1(rng.gen_range(0..4) * 0x20);
            b.op(0x52, 2, 0);
        }
        45..=49 => {
            b.push1(rng.gen_range(0..5) * 0x10);
            b.op(0x51, 1, 1);
        }
        50..=53 => {
            b.push1(rng.gen_range(0..3));
            b.op(0x55, 2, 0);
        }
        54..=56 => {
            b.push1(rng.gen_range(0..3) * 0x20 + 0x20);
            b.push1(rng.gen_range(0..3) * 0x10);
            b.op(0x20, 2, 1);
        }
        57..=60 => {
            // CALL family with small constant windows
            let kind = *[0xf1u8, 0xfa, 0xf4].choose(rng).unwrap();
            b.push1(rng.gen_range(0..3) * 0x20);
            b.push1(rng.gen_range(0..4) * 0x10);
            b.push1(rng.gen_range(0..3) * 0x20);
            b.push1(rng.gen_range(0..3) * 0x20);
            if kind == 0xf1 {
                b.push1(small(rng));
            }
            b.push1(*[0xc0u8, 0xd0, 0xe0].choose(rng).unwrap());
            b.push1(0xff);
            b.op(kind, if kind == 0xf1 { 7 } else { 6 }, 1);
        }
        61..=62 => {
            b.push1(rng.gen_range(0..3) * 0x20);
            b.push1(rng.gen_range(0..3) * 0x08);
            b.push1(rng.gen_range(0..3) * 0x10);
            b.op(0x3e, 3, 0);
        }
        63 => {
            b.push1(0x20);
            b.push1(0);
            b.op(0xa0, 2, 0);
        }
        64 => {
            b.push1(small(rng));
            b.op(0x31, 1, 1);
        }
        _ => {
            let op = *PLAIN.choose(rng).unwrap();
            let (pops, pushes) = match op {
                0x15 | 0x19 | 0x54 => (1, 1),
                0x30 | 0x33 | 0x34 | 0x36 | 0x3d | 0x58 => (0, 1),
                0x50 => (1, 0),
                0x80..=0x82 => ((op - 0x7f) as usize, (op - 0x7e) as usize),
                0x90 | 0x91 => ((op - 0x8e) as usize, (op - 0x8e) as usize),
                _ => (2, 1),
            };
            if b.depth >= pops {
                b.op(op, pops, pushes);
            } else {
                b.push1(small(rng));
            }
        }
    }
}

/// A loop-free program: forward jumps only, each target pushed by a PUSH2
/// immediately before its JUMP or JUMPI. `blocks` bounds the number of
/// basic blocks.
pub fn random_program<R: Rng>(rng: &mut R, blocks: usize) -> Vec<u8> {
    let blocks = blocks.max(1);
    let mut b = Builder { code: Vec::new(), fixups: Vec::new(), labels: vec![0; blocks], depth: 0 };
    for i in 0..blocks {
        if i > 0 {
            b.labels[i] = b.code.len();
            b.code.push(0x5b);
        }
        for _ in 0..rng.gen_range(1..8) {
            emit_random(rng, &mut b);
        }
        if i + 1 < blocks {
            let target = rng.gen_range(i + 1..blocks);
            match rng.gen_range(0..10) {
                0..=5 => {
                    if b.depth == 0 {
                        b.push1(0);
                        b.op(0x35, 1, 1);
                    }
                    b.jump_to(target, 0x57);
                }
                6 => b.jump_to(target, 0x56),
                _ => {}
            }
        }
    }
    match rng.gen_range(0..4) {
        0 => b.code.extend([0x60, 0x00, 0x60, 0x00, 0xfd]),
        1 => b.code.extend([0x60, 0x20, 0x60, 0x00, 0xf3]),
        2 => b.code.push(0x00),
        _ => {}
    }
    for (pos, label) in b.fixups {
        let t = b.labels[label] as u16;
        b.code[pos..pos + 2].copy_from_slice(&t.to_be_bytes());
    }
    b.code
}

fn small_word<R: Rng>(rng: &mut R) -> U256 {
    match rng.gen_range(0..6) {
        0 => U256::ZERO,
        1 => U256::from(1),
        2 => U256::from(rng.gen_range(0u64..8)),
        3 => U256::from(rng.gen::<u8>()),
        4 => U256::from(0x20),
        _ => U256::from_limbs([rng.gen(), rng.gen(), rng.gen(), rng.gen()]),
    }
}

/// Inputs biased toward the small constants used by [`random_program`].
pub fn random_env<R: Rng>(rng: &mut R) -> ConcreteEnv {
    let words = rng.gen_range(0..4);
    let mut calldata = Vec::new();
    for _ in 0..words {
        calldata.extend(small_word(rng).to_be_bytes::<32>());
    }
    if rng.gen_bool(0.2) {
        calldata.truncate(calldata.len().saturating_sub(rng.gen_range(0..32)));
    }
    let mut storage = std::collections::BTreeMap::new();
    for s in 0u8..3 {
        if rng.gen_bool(0.4) {
            storage.insert(U256::from(s), small_word(rng));
        }
    }
    let balances = [0xc0u64, 0xd0, 0xe0].iter().map(|a| (U256::from(*a), small_word(rng))).collect();
    ConcreteEnv {
        calldata,
        callvalue: small_word(rng),
        caller: U256::from(rng.gen::<u64>()),
        address: U256::from(rng.gen::<u64>()),
        balances,
        storage,
        call_success: (0..8).map(|_| rng.gen_bool(0.7)).collect(),
        return_data: (0..8)
            .map(|_| {
                let n = rng.gen_range(0..3) * 32 + rng.gen_range(0..2) * 7;
                (0..n).map(|_| if rng.gen_bool(0.5) { 0 } else { rng.gen() }).collect()
            })
            .collect(),
    }
}

/// Symbols `0..n`, untainted, all with calldata origins.
pub fn symbols(n: u32) -> Vec<SymValue> {
    (0..n).map(|i| SymValue::symbol(i, SymbolOrigin::CallData(U256::from(32 * i)), Taint::empty())).collect()
}

fn random_expr<R: Rng>(rng: &mut R, syms: &[SymValue], depth: u32) -> SymValue {
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.6) {
            syms.choose(rng).unwrap().clone()
        } else {
            SymValue::concrete(U256::from(rng.gen_range(0u64..300)))
        };
    }
    let op = *[
        Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Mod, Op::Lt, Op::Gt, Op::Eq, Op::IsZero, Op::And, Op::Or, Op::Xor,
        Op::Not, Op::Shl, Op::Shr, Op::Exp,
    ]
    .choose(rng)
    .unwrap();
    let args = (0..op.arity()).map(|_| random_expr(rng, syms, depth - 1)).collect();
    SymValue::expr(op, args)
}

/// A conjunction of random comparisons over `syms`.
pub fn random_constraints<R: Rng>(rng: &mut R, syms: &[SymValue], count: usize) -> Vec<PathConstraint> {
    (0..count)
        .map(|_| {
            let cmp = *[Op::Eq, Op::Lt, Op::Gt, Op::IsZero].choose(rng).unwrap();
            let v = if cmp == Op::IsZero {
                SymValue::unary(Op::IsZero, random_expr(rng, syms, 2))
            } else {
                SymValue::binary(cmp, random_expr(rng, syms, 2), random_expr(rng, syms, 2))
            };
            PathConstraint::new(v, rng.gen_bool(0.5))
        })
        .collect()
}
