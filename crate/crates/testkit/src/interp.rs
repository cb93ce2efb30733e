//! Reference concrete interpreter over the supported opcode subset.
//!
//! Decodes raw bytes itself and shares no code with the symbolic engine. The
//! external-call model matches the engine's: calls are not executed, their
//! success flag and return bytes come from [`ConcreteEnv`], and return data is
//! zero-extended so any requested output window is filled.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ruint::aliases::U256;
use sha3::{Digest, Keccak256};

/// Copies and hashes above this many bytes abort the run.
pub const MAX_SIZE: usize = 32 * 1024;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConcreteEnv {
    pub calldata: Vec<u8>,
    pub callvalue: U256,
    pub caller: U256,
    pub address: U256,
    pub balances: BTreeMap<U256, U256>,
    /// Initial storage; missing slots hold zero.
    pub storage: BTreeMap<U256, U256>,
    /// Success flag per call ordinal; missing entries succeed.
    pub call_success: Vec<bool>,
    /// Return bytes per call ordinal; missing entries are empty.
    pub return_data: Vec<Vec<u8>>,
}

impl ConcreteEnv {
    pub fn calldata_word(&self, off: U256) -> U256 {
        word_at(&self.calldata, off)
    }

    pub fn balance(&self, addr: U256) -> U256 {
        self.balances.get(&addr).copied().unwrap_or_default()
    }

    pub fn initial_storage(&self, slot: U256) -> U256 {
        self.storage.get(&slot).copied().unwrap_or_default()
    }

    pub fn success(&self, call: u32) -> bool {
        self.call_success.get(call as usize).copied().unwrap_or(true)
    }

    pub fn returned(&self, call: u32) -> &[u8] {
        self.return_data.get(call as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    /// 32-byte big-endian word of call `call`'s zero-extended return data.
    pub fn output_word(&self, call: u32, off: U256) -> U256 {
        word_at(self.returned(call), off)
    }
}

/// Big-endian word at `off` in `bytes`, zero past the end.
pub fn word_at(bytes: &[u8], off: U256) -> U256 {
    let mut w = [0u8; 32];
    if let Ok(o) = usize::try_from(off) {
        for (i, b) in w.iter_mut().enumerate() {
            if let Some(v) = o.checked_add(i).and_then(|j| bytes.get(j)) {
                *b = *v;
            }
        }
    }
    U256::from_be_bytes(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    StackUnderflow,
    StackOverflow,
    BadJump,
    UnknownOpcode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Stop,
    Return,
    Revert,
    Fault(Fault),
    /// Step or size cap exceeded; the run says nothing.
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteCall {
    pub site: usize,
    pub opcode: u8,
    pub callee: U256,
    pub value: U256,
    pub input: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteRun {
    pub status: Status,
    /// Offsets of executed instructions.
    pub trace: Vec<usize>,
    /// Value pushed by each step, if any.
    pub pushed: Vec<Option<U256>>,
    /// (site, slot, value) per SSTORE.
    pub storage_writes: Vec<(usize, U256, U256)>,
    pub calls: Vec<ConcreteCall>,
    pub stack: Vec<U256>,
}

fn keccak(bytes: &[u8]) -> U256 {
    U256::from_be_slice(&Keccak256::digest(bytes))
}

fn jumpdests(code: &[u8]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut pc = 0;
    while pc < code.len() {
        let b = code[pc];
        if b == 0x5b {
            out.insert(pc);
        }
        pc += 1 + if (0x60..=0x7f).contains(&b) { (b - 0x5f) as usize } else { 0 };
    }
    out
}

/// (pops, pushes) for supported opcodes.
fn shape(b: u8) -> Option<(usize, usize)> {
    Some(match b {
        0x00 | 0x5b => (0, 0),
        0x01..=0x04 | 0x06 | 0x0a | 0x10 | 0x11 | 0x14 | 0x16..=0x18 | 0x1b | 0x1c | 0x20 => (2, 1),
        0x15 | 0x19 | 0x31 | 0x35 | 0x51 | 0x54 => (1, 1),
        0x30 | 0x33 | 0x34 | 0x36 | 0x3d | 0x58 => (0, 1),
        0x3e => (3, 0),
        0x50 | 0x56 => (1, 0),
        0x52 | 0x55 | 0x57 | 0xf3 | 0xfd => (2, 0),
        0x60..=0x7f => (0, 1),
        0x80..=0x8f => ((b - 0x7f) as usize, (b - 0x7e) as usize),
        0x90..=0x9f => ((b - 0x8e) as usize, (b - 0x8e) as usize),
        0xa0..=0xa4 => ((b - 0xa0 + 2) as usize, 0),
        0xf1 => (7, 1),
        0xf4 | 0xfa => (6, 1),
        _ => return None,
    })
}

struct Machine<'a> {
    code: &'a [u8],
    env: &'a ConcreteEnv,
    dests: BTreeSet<usize>,
    stack: Vec<U256>,
    memory: HashMap<U256, u8>,
    storage: BTreeMap<U256, U256>,
    last_call: Option<u32>,
    run: ConcreteRun,
}

impl Machine<'_> {
    fn pop(&mut self) -> U256 {
        self.stack.pop().expect("depth checked")
    }

    fn mem_read(&self, off: U256, len: usize) -> Vec<u8> {
        (0..len)
            .map(|i| self.memory.get(&off.wrapping_add(U256::from(i))).copied().unwrap_or(0))
            .collect()
    }

    fn mem_write(&mut self, off: U256, bytes: &[u8]) {
        for (i, b) in bytes.iter().enumerate() {
            self.memory.insert(off.wrapping_add(U256::from(i)), *b);
        }
    }

    fn size(v: U256) -> Option<usize> {
        usize::try_from(v).ok().filter(|n| *n <= MAX_SIZE)
    }

    fn sload(&self, slot: U256) -> U256 {
        self.storage.get(&slot).copied().unwrap_or_else(|| self.env.initial_storage(slot))
    }

    fn jump_ok(&self, dest: U256) -> Option<usize> {
        usize::try_from(dest).ok().filter(|d| self.dests.contains(d))
    }
}

/// Executes `code` under `env` for at most `max_steps` instructions.
pub fn run(code: &[u8], env: &ConcreteEnv, max_steps: usize) -> ConcreteRun {
    let mut m = Machine {
        code,
        env,
        dests: jumpdests(code),
        stack: Vec::new(),
        memory: HashMap::new(),
        storage: BTreeMap::new(),
        last_call: None,
        run: ConcreteRun {
            status: Status::Stop,
            trace: vec![],
            pushed: vec![],
            storage_writes: vec![],
            calls: vec![],
            stack: vec![],
        },
    };
    let mut pc = 0usize;
    let status = loop {
        if pc >= m.code.len() {
            break Status::Stop;
        }
        if m.run.trace.len() >= max_steps {
            break Status::Aborted;
        }
        let b = m.code[pc];
        m.run.trace.push(pc);
        let Some((pops, pushes)) = shape(b) else {
            m.run.pushed.push(None);
            break Status::Fault(Fault::UnknownOpcode);
        };
        if m.stack.len() < pops {
            m.run.pushed.push(None);
            break Status::Fault(Fault::StackUnderflow);
        }
        if m.stack.len() - pops + pushes > 1024 {
            m.run.pushed.push(None);
            break Status::Fault(Fault::StackOverflow);
        }
        match exec(&mut m, pc, b) {
            Step::Next(p) => {
                let pushed = (pushes > 0 && !(0x80..=0x9f).contains(&b)).then(|| *m.stack.last().unwrap());
                m.run.pushed.push(pushed);
                pc = p;
            }
            Step::Halt(s) => {
                m.run.pushed.push(None);
                break s;
            }
        }
    };
    m.run.status = status;
    m.run.stack = m.stack;
    m.run
}

enum Step {
    Next(usize),
    Halt(Status),
}

fn bool_word(b: bool) -> U256 {
    if b {
        U256::from(1)
    } else {
        U256::ZERO
    }
}

fn exec(m: &mut Machine<'_>, pc: usize, b: u8) -> Step {
    let next = pc + 1;
    macro_rules! bin {
        ($f:expr) => {{
            let a = m.pop();
            let c = m.pop();
            let f: fn(U256, U256) -> U256 = $f;
            m.stack.push(f(a, c));
        }};
    }
    match b {
        0x00 => return Step::Halt(Status::Stop),
        0x01 => bin!(|a, c| a.wrapping_add(c)),
        0x02 => bin!(|a, c| a.wrapping_mul(c)),
        0x03 => bin!(|a, c| a.wrapping_sub(c)),
        0x04 => bin!(|a, c| if c.is_zero() { U256::ZERO } else { a / c }),
        0x06 => bin!(|a, c| if c.is_zero() { U256::ZERO } else { a % c }),
        0x0a => bin!(|a, c| a.wrapping_pow(c)),
        0x10 => bin!(|a, c| bool_word(a < c)),
        0x11 => bin!(|a, c| bool_word(a > c)),
        0x14 => bin!(|a, c| bool_word(a == c)),
        0x16 => bin!(|a, c| a & c),
        0x17 => bin!(|a, c| a | c),
        0x18 => bin!(|a, c| a ^ c),
        0x1b => bin!(|s, v| if s >= U256::from(256) { U256::ZERO } else { v << s.to::<usize>() }),
        0x1c => bin!(|s, v| if s >= U256::from(256) { U256::ZERO } else { v >> s.to::<usize>() }),
        0x15 => {
            let a = m.pop();
            m.stack.push(bool_word(a.is_zero()));
        }
        0x19 => {
            let a = m.pop();
            m.stack.push(!a);
        }
        0x20 => {
            let off = m.pop();
            let Some(n) = Machine::size(m.pop()) else { return Step::Halt(Status::Aborted) };
            let bytes = m.mem_read(off, n);
            m.stack.push(keccak(&bytes));
        }
        0x30 => m.stack.push(m.env.address),
        0x31 => {
            let a = m.pop();
            m.stack.push(m.env.balance(a));
        }
        0x33 => m.stack.push(m.env.caller),
        0x34 => m.stack.push(m.env.callvalue),
        0x35 => {
            let off = m.pop();
            m.stack.push(m.env.calldata_word(off));
        }
        0x36 => m.stack.push(U256::from(m.env.calldata.len())),
        0x3d => {
            let n = m.last_call.map(|c| m.env.returned(c).len()).unwrap_or(0);
            m.stack.push(U256::from(n));
        }
        0x3e => {
            let dest = m.pop();
            let off = m.pop();
            let Some(n) = Machine::size(m.pop()) else { return Step::Halt(Status::Aborted) };
            let bytes: Vec<u8> = match m.last_call {
                Some(c) => {
                    let src = m.env.returned(c);
                    (0..n)
                        .map(|i| {
                            usize::try_from(off.wrapping_add(U256::from(i)))
                                .ok()
                                .and_then(|j| src.get(j).copied())
                                .unwrap_or(0)
                        })
                        .collect()
                }
                None => vec![0; n],
            };
            m.mem_write(dest, &bytes);
        }
        0x50 => {
            m.pop();
        }
        0x51 => {
            let off = m.pop();
            let w = U256::from_be_slice(&m.mem_read(off, 32));
            m.stack.push(w);
        }
        0x52 => {
            let off = m.pop();
            let v = m.pop();
            m.mem_write(off, &v.to_be_bytes::<32>());
        }
        0x54 => {
            let slot = m.pop();
            let v = m.sload(slot);
            m.stack.push(v);
        }
        0x55 => {
            let slot = m.pop();
            let v = m.pop();
            m.run.storage_writes.push((pc, slot, v));
            m.storage.insert(slot, v);
        }
        0x56 => {
            let d = m.pop();
            return match m.jump_ok(d) {
                Some(d) => Step::Next(d),
                None => Step::Halt(Status::Fault(Fault::BadJump)),
            };
        }
        0x57 => {
            let d = m.pop();
            let c = m.pop();
            if c.is_zero() {
                return Step::Next(next);
            }
            return match m.jump_ok(d) {
                Some(d) => Step::Next(d),
                None => Step::Halt(Status::Fault(Fault::BadJump)),
            };
        }
        0x58 => m.stack.push(U256::from(pc)),
        0x5b => {}
        0x60..=0x7f => {
            let n = (b - 0x5f) as usize;
            let mut imm = [0u8; 32];
            for i in 0..n {
                imm[32 - n + i] = m.code.get(pc + 1 + i).copied().unwrap_or(0);
            }
            m.stack.push(U256::from_be_bytes(imm));
            return Step::Next(pc + 1 + n);
        }
        0x80..=0x8f => {
            let n = (b - 0x7f) as usize;
            let v = m.stack[m.stack.len() - n];
            m.stack.push(v);
        }
        0x90..=0x9f => {
            let n = (b - 0x8f) as usize;
            let len = m.stack.len();
            m.stack.swap(len - 1, len - 1 - n);
        }
        0xa0..=0xa4 => {
            for _ in 0..(b - 0xa0 + 2) {
                m.pop();
            }
        }
        0xf1 | 0xf4 | 0xfa => {
            let _gas = m.pop();
            let callee = m.pop();
            let value = if b == 0xf1 { m.pop() } else { U256::ZERO };
            let args_off = m.pop();
            let Some(args_n) = Machine::size(m.pop()) else { return Step::Halt(Status::Aborted) };
            let ret_off = m.pop();
            let Some(ret_n) = Machine::size(m.pop()) else { return Step::Halt(Status::Aborted) };
            let ordinal = m.run.calls.len() as u32;
            let input = m.mem_read(args_off, args_n);
            m.run.calls.push(ConcreteCall { site: pc, opcode: b, callee, value, input });
            let src = m.env.returned(ordinal);
            let out: Vec<u8> = (0..ret_n).map(|i| src.get(i).copied().unwrap_or(0)).collect();
            m.mem_write(ret_off, &out);
            m.last_call = Some(ordinal);
            m.stack.push(bool_word(m.env.success(ordinal)));
        }
        0xf3 | 0xfd => {
            m.pop();
            m.pop();
            return Step::Halt(if b == 0xf3 { Status::Return } else { Status::Revert });
        }
        _ => unreachable!("shape() admits only handled opcodes"),
    }
    Step::Next(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_stop() {
        let r = run(&[0x60, 0x02, 0x60, 0x03, 0x03, 0x00], &ConcreteEnv::default(), 100);
        assert_eq!(r.status, Status::Stop);
        // SUB pops 3 then 2
        assert_eq!(r.stack, [U256::from(1)]);
        assert_eq!(r.trace, [0, 2, 4, 5]);
        assert_eq!(r.pushed[2], Some(U256::from(1)));
    }

    #[test]
    fn jumpdest_inside_immediate_is_rejected() {
        let r = run(&[0x60, 0x5b, 0x60, 0x01, 0x56], &ConcreteEnv::default(), 100);
        assert_eq!(r.status, Status::Fault(Fault::BadJump));
    }

    #[test]
    fn unaligned_memory() {
        // MSTORE 0xff at 1 puts the byte at 32; MLOAD 2 sees it at index 30
        let code = [0x60, 0xff, 0x60, 0x01, 0x52, 0x60, 0x02, 0x51, 0x00];
        let r = run(&code, &ConcreteEnv::default(), 100);
        assert_eq!(r.stack, [U256::from(0xff) << 8]);
    }

    #[test]
    fn call_output_zero_extended() {
        let env = ConcreteEnv { return_data: vec![vec![0xab]], call_success: vec![false], ..Default::default() };
        // STATICCALL(gas, 0xc0, 0, 0, 0, 32); MLOAD 0
        let code = [0x60, 0x20, 0x60, 0x00, 0x60, 0x00, 0x60, 0x00, 0x60, 0xc0, 0x60, 0xff, 0xfa, 0x60, 0x00, 0x51, 0x00];
        let r = run(&code, &env, 100);
        assert_eq!(r.stack, [U256::ZERO, U256::from(0xab) << 248]);
        assert_eq!(r.calls.len(), 1);
        assert_eq!(r.calls[0].callee, U256::from(0xc0));
    }

    #[test]
    fn step_cap_aborts() {
        let code = [0x5b, 0x60, 0x00, 0x56];
        assert_eq!(run(&code, &ConcreteEnv::default(), 50).status, Status::Aborted);
    }
}
