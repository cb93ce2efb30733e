use crate::evm::opcode::*;
use crate::evm::{Instruction, Program};
use crate::U256;

use super::state::*;
use super::value::{Op, SymValue, SymbolOrigin, Taint};

/// Largest concrete byte range copied or hashed word by word; anything
/// larger is havocked.
const MAX_COPY_BYTES: usize = 32 * 1024;

/// Per-step options that change the taint policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepOptions {
    /// Propagate the taint of branch conditions into every value computed
    /// afterwards on the path.
    pub control_taint: bool,
}

/// Executes one instruction and returns the successor states.
///
/// A symbolic JUMPI yields two successors ordered (false branch, true branch).
/// Execution errors produce a single terminal state labeled with the error.
pub fn step(state: MachineState, program: &Program, hooks: &dyn CalleeClassifier) -> Vec<MachineState> {
    step_with(state, program, hooks, StepOptions::default())
}

pub fn step_with(
    mut st: MachineState,
    program: &Program,
    hooks: &dyn CalleeClassifier,
    opts: StepOptions,
) -> Vec<MachineState> {
    if st.outcome.is_terminal() {
        return vec![st];
    }
    let Some(ins) = program.at(st.pc).cloned() else {
        // running off the end of code is an implicit STOP
        st.outcome = Outcome::Stop;
        return vec![st];
    };
    let step_idx = st.trace.len();
    st.trace.push(ins.offset);

    let op = ins.opcode;
    if st.stack.len() < op.pops as usize {
        st.outcome = Outcome::Error(ExecError::StackUnderflow);
        return vec![st];
    }
    if st.stack.len() - op.pops as usize + op.pushes as usize > STACK_LIMIT {
        st.outcome = Outcome::Error(ExecError::StackOverflow);
        return vec![st];
    }

    let mut ex = Exec { st, step: step_idx, ins: &ins, opts };
    match op.code {
        JUMP => return ex.jump(program),
        JUMPI => return ex.jumpi(program),
        _ => ex.simple(hooks),
    }
    let mut st = ex.st;
    if !st.outcome.is_terminal() {
        st.pc = ins.next_offset();
    }
    vec![st]
}

struct Exec<'a> {
    st: MachineState,
    step: usize,
    ins: &'a Instruction,
    opts: StepOptions,
}

impl Exec<'_> {
    fn pop(&mut self) -> SymValue {
        self.st.stack.pop().expect("stack depth checked before dispatch")
    }

    fn push(&mut self, v: SymValue) {
        let v = if self.opts.control_taint && !self.st.control_taint.is_empty() {
            v.with_taint(&self.st.control_taint)
        } else {
            v
        };
        self.st.stack.push(v);
    }

    fn havoc_value(&mut self, taint: Taint) -> SymValue {
        self.st.fresh(SymbolOrigin::Havoc { step: self.step }, taint)
    }

    fn binary(&mut self, op: Op) {
        let a = self.pop();
        let b = self.pop();
        self.push(SymValue::binary(op, a, b));
    }

    fn unary(&mut self, op: Op) {
        let a = self.pop();
        self.push(SymValue::unary(op, a));
    }

    fn env_value(&mut self, concrete: Option<U256>, origin: SymbolOrigin) -> SymValue {
        match concrete {
            Some(v) => SymValue::concrete(v),
            None => self.st.env_symbol(origin),
        }
    }

    fn last_call_taint(&self) -> Taint {
        self.st
            .call_log
            .last()
            .and_then(|c| c.origin)
            .map(Taint::single)
            .unwrap_or_default()
    }

    fn simple(&mut self, hooks: &dyn CalleeClassifier) {
        let code = self.ins.opcode.code;
        match code {
            STOP => self.st.outcome = Outcome::Stop,
            ADD => self.binary(Op::Add),
            MUL => self.binary(Op::Mul),
            SUB => self.binary(Op::Sub),
            DIV => self.binary(Op::Div),
            MOD => self.binary(Op::Mod),
            EXP => self.binary(Op::Exp),
            LT => self.binary(Op::Lt),
            GT => self.binary(Op::Gt),
            EQ => self.binary(Op::Eq),
            AND => self.binary(Op::And),
            OR => self.binary(Op::Or),
            XOR => self.binary(Op::Xor),
            SHL => self.binary(Op::Shl),
            SHR => self.binary(Op::Shr),
            ISZERO => self.unary(Op::IsZero),
            NOT => self.unary(Op::Not),
            SHA3 => self.sha3(),
            ADDRESS => {
                let v = self.env_value(self.st.env.address, SymbolOrigin::Address);
                self.push(v);
            }
            CALLER => {
                let v = self.env_value(self.st.env.caller, SymbolOrigin::Caller);
                self.push(v);
            }
            CALLVALUE => {
                let v = self.env_value(self.st.env.callvalue, SymbolOrigin::CallValue);
                self.push(v);
            }
            CALLDATASIZE => {
                let v = self.st.env_symbol(SymbolOrigin::CallDataSize);
                self.push(v);
            }
            BALANCE => {
                let addr = self.pop();
                let v = match addr.as_concrete() {
                    Some(a) => self.st.env_symbol(SymbolOrigin::Balance(a)).with_taint(addr.taint()),
                    None => self.havoc_value(addr.taint().clone()),
                };
                self.push(v);
            }
            CALLDATALOAD => {
                let off = self.pop();
                let v = match off.as_concrete() {
                    Some(o) => self.st.env_symbol(SymbolOrigin::CallData(o)).with_taint(off.taint()),
                    None => self.havoc_value(off.taint().clone()),
                };
                self.push(v);
            }
            RETURNDATASIZE => {
                let v = match self.st.call_log.last() {
                    None => SymValue::concrete(U256::ZERO),
                    Some(c) => {
                        let call = c.ordinal;
                        let taint = self.last_call_taint();
                        self.st.env_symbol(SymbolOrigin::ReturnDataSize { call }).with_taint(&taint)
                    }
                };
                self.push(v);
            }
            RETURNDATACOPY => {
                let dest = self.pop();
                let off = self.pop();
                let size = self.pop();
                let call = self.st.call_log.last().map(|c| c.ordinal);
                let taint = self.last_call_taint();
                self.copy_output(&dest, &off, &size, call, taint);
            }
            POP => {
                self.pop();
            }
            MLOAD => {
                let off = self.pop();
                let v = match off.as_concrete().and_then(|o| self.st.memory_word(o)) {
                    Some(v) => v.with_taint(off.taint()),
                    None => {
                        let t = self.st.memory.stored_taint.union(off.taint());
                        self.havoc_value(t)
                    }
                };
                self.push(v);
            }
            MSTORE => {
                let off = self.pop();
                let v = self.pop();
                match off.as_concrete() {
                    Some(o) => self.st.store_memory_word(o, v),
                    None => self.st.memory.havoc_write(&v.with_taint(off.taint())),
                }
            }
            SLOAD => {
                let slot = self.pop();
                let known = slot.as_concrete().and_then(|s| match self.st.storage.words.get(&s) {
                    Some(v) => Some(v.clone()),
                    None if !self.st.storage.havoc => Some(self.st.env_symbol(SymbolOrigin::Storage(s))),
                    None => None,
                });
                let v = match known {
                    Some(v) => v.with_taint(slot.taint()),
                    None => {
                        let t = self.st.storage.stored_taint.union(slot.taint());
                        self.havoc_value(t)
                    }
                };
                self.push(v);
            }
            SSTORE => {
                let slot = self.pop();
                let v = self.pop();
                self.st.storage_writes.push(StorageWrite {
                    site: self.ins.offset,
                    step: self.step,
                    slot: slot.clone(),
                    value: v.clone(),
                });
                match slot.as_concrete() {
                    Some(s) => self.st.storage.write(s, v),
                    None => self.st.storage.havoc_write(&v.with_taint(slot.taint())),
                }
            }
            PC => self.push(SymValue::from_u64(self.ins.offset as u64)),
            JUMPDEST => {
                *self.st.jumpdest_visits.entry(self.ins.offset).or_insert(0) += 1;
            }
            PUSH1..=PUSH32 => {
                let imm = self.ins.immediate.expect("push carries an immediate");
                self.push(SymValue::concrete(imm));
            }
            DUP1..=DUP16 => {
                let n = (code - DUP1 + 1) as usize;
                let v = self.st.stack[self.st.stack.len() - n].clone();
                self.st.stack.push(v);
            }
            SWAP1..=SWAP16 => {
                let n = (code - SWAP1 + 1) as usize;
                let len = self.st.stack.len();
                self.st.stack.swap(len - 1, len - 1 - n);
            }
            LOG0..=LOG4 => {
                for _ in 0..self.ins.opcode.pops {
                    self.pop();
                }
            }
            CALL | STATICCALL | DELEGATECALL => self.call(hooks),
            RETURN | REVERT => {
                self.pop();
                self.pop();
                self.st.outcome = if code == RETURN { Outcome::Return } else { Outcome::Revert };
            }
            other => unreachable!("opcode {other:#x} is in the table but has no semantics"),
        }
    }

    fn sha3(&mut self) {
        let off = self.pop();
        let size = self.pop();
        let in_taint = off.taint().union(size.taint());
        let region = match (off.as_concrete(), size.as_concrete()) {
            (Some(o), Some(n)) if n <= U256::from(MAX_COPY_BYTES) => {
                let n = n.to::<usize>();
                (0..n.div_ceil(32))
                    .map(|i| self.st.memory_word(o.wrapping_add(U256::from(32 * i))))
                    .collect::<Option<Vec<_>>>()
                    .map(|words| (n, words))
            }
            _ => None,
        };
        let v = match region {
            Some((n, words)) => SymValue::expr(Op::Sha3 { len: n as u32 }, words).with_taint(&in_taint),
            None => {
                let t = self.st.memory.stored_taint.union(&in_taint);
                self.havoc_value(t)
            }
        };
        self.push(v);
    }

    /// Writes the first `n` bytes of `word` to memory at `dest`.
    fn store_prefix(&mut self, dest: U256, word: SymValue, n: usize) {
        if n == 32 {
            self.st.store_memory_word(dest, word);
            return;
        }
        let bits = n * 8;
        match self.st.memory_word(dest) {
            Some(old) => {
                let merged = SymValue::binary(
                    Op::Or,
                    SymValue::binary(Op::And, old, SymValue::concrete(U256::MAX >> bits)),
                    SymValue::binary(Op::And, word, SymValue::concrete(U256::MAX << (256 - bits))),
                );
                self.st.store_memory_word(dest, merged);
            }
            None => {
                let misalign = dest.as_limbs()[0] as usize % 32;
                let base = dest - U256::from(misalign);
                self.st.memory.forget(base, word.taint());
                self.st.memory.forget(base.wrapping_add(U256::from(32)), word.taint());
            }
        }
    }

    /// Copies `size` bytes of a call's return data, starting at `off`, to
    /// memory at `dest`. Without a prior call the source reads as zeros.
    fn copy_output(&mut self, dest: &SymValue, off: &SymValue, size: &SymValue, call: Option<u32>, taint: Taint) {
        let operand_taint = dest.taint().union(off.taint()).union(size.taint());
        match (dest.as_concrete(), off.as_concrete(), size.as_concrete()) {
            (Some(d), Some(o), Some(n)) if n <= U256::from(MAX_COPY_BYTES) => {
                let n = n.to::<usize>();
                for i in (0..n).step_by(32) {
                    let src = o.wrapping_add(U256::from(i));
                    let word = match call {
                        Some(call) => self
                            .st
                            .env_symbol(SymbolOrigin::CallOutput { call, offset: src })
                            .with_taint(&taint),
                        None => SymValue::concrete(U256::ZERO),
                    };
                    self.store_prefix(d.wrapping_add(U256::from(i)), word, (n - i).min(32));
                }
            }
            (_, _, Some(n)) if n.is_zero() => {}
            _ => {
                let marker = SymValue::concrete_tainted(U256::ZERO, taint.union(&operand_taint));
                self.st.memory.havoc_write(&marker);
            }
        }
    }

    fn read_input(&mut self, off: &SymValue, size: &SymValue) -> Vec<SymValue> {
        match (off.as_concrete(), size.as_concrete()) {
            (Some(o), Some(n)) if n <= U256::from(MAX_COPY_BYTES) => {
                let n = n.to::<usize>();
                (0..n.div_ceil(32))
                    .map(|i| match self.st.memory_word(o.wrapping_add(U256::from(32 * i))) {
                        Some(w) => w,
                        None => {
                            let t = self.st.memory.stored_taint.clone();
                            self.havoc_value(t)
                        }
                    })
                    .collect()
            }
            _ => {
                let t = self.st.memory.stored_taint.union(off.taint()).union(size.taint());
                vec![self.havoc_value(t)]
            }
        }
    }

    fn call(&mut self, hooks: &dyn CalleeClassifier) {
        let code = self.ins.opcode.code;
        let _gas = self.pop();
        let callee = self.pop();
        let value = if code == CALL { self.pop() } else { SymValue::concrete(U256::ZERO) };
        let args_off = self.pop();
        let args_size = self.pop();
        let ret_off = self.pop();
        let ret_size = self.pop();
        let kind = match code {
            CALL => CallKind::Call,
            STATICCALL => CallKind::StaticCall,
            _ => CallKind::DelegateCall,
        };

        let input = self.read_input(&args_off, &args_size);
        let args_tainted = input.iter().any(SymValue::is_tainted);
        let classified = hooks.classify(&callee);
        let ordinal = self.st.call_count();
        let origin = hooks.is_source(classified).then(|| {
            let id = self.st.origins.len() as u32;
            self.st.origins.push(OriginInfo { site: self.ins.offset, step: self.step, call: ordinal });
            id
        });
        let taint = origin.map(Taint::single).unwrap_or_default();
        let returned = self.st.fresh(SymbolOrigin::CallSuccess { call: ordinal }, taint.clone());

        self.st.call_log.push(ExternalCallRecord {
            site: self.ins.offset,
            step: self.step,
            ordinal,
            kind,
            callee,
            value,
            input,
            args_tainted,
            classified,
            returned: returned.clone(),
            origin,
        });
        self.copy_output(&ret_off, &SymValue::concrete(U256::ZERO), &ret_size, Some(ordinal), taint);
        self.push(returned);
    }

    fn jump_target(&self, program: &Program, dest: &SymValue) -> Result<usize, ExecError> {
        let d = dest.as_concrete().ok_or(ExecError::SymbolicJumpTarget)?;
        if d >= U256::from(program.code().len()) {
            return Err(ExecError::InvalidJumpDest);
        }
        let d = d.to::<usize>();
        if program.is_jumpdest(d) {
            Ok(d)
        } else {
            Err(ExecError::InvalidJumpDest)
        }
    }

    fn jump(mut self, program: &Program) -> Vec<MachineState> {
        let dest = self.pop();
        match self.jump_target(program, &dest) {
            Ok(d) => self.st.pc = d,
            Err(e) => self.st.outcome = Outcome::Error(e),
        }
        vec![self.st]
    }

    fn jumpi(mut self, program: &Program) -> Vec<MachineState> {
        let dest = self.pop();
        let cond = self.pop();
        let fallthrough = self.ins.next_offset();
        let target = self.jump_target(program, &dest);

        if let Some(c) = cond.as_concrete() {
            if c.is_zero() {
                self.st.pc = fallthrough;
            } else {
                match target {
                    Ok(d) => self.st.pc = d,
                    Err(e) => self.st.outcome = Outcome::Error(e),
                }
            }
            return vec![self.st];
        }
        if target == Err(ExecError::SymbolicJumpTarget) {
            self.st.outcome = Outcome::Error(ExecError::SymbolicJumpTarget);
            return vec![self.st];
        }

        let mut base = self.st;
        if self.opts.control_taint {
            base.control_taint.extend(cond.taint());
        }
        let mut taken = base.clone();
        let mut not_taken = base;

        not_taken.constraints.push(PathConstraint::new(cond.clone(), false));
        not_taken.pc = fallthrough;

        taken.constraints.push(PathConstraint::new(cond, true));
        match target {
            Ok(d) => taken.pc = d,
            Err(e) => taken.outcome = Outcome::Error(e),
        }
        vec![not_taken, taken]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evm::{assemble, disassemble};

    fn run_to_end(src: &str) -> MachineState {
        let p = disassemble(&assemble(src).unwrap()).unwrap();
        let mut st = MachineState::new(CallEnv::default());
        while !st.outcome.is_terminal() {
            let mut next = step(st, &p, &());
            assert_eq!(next.len(), 1, "unexpected fork");
            st = next.pop().unwrap();
        }
        st
    }

    #[test]
    fn concrete_add() {
        let st = run_to_end("PUSH1 2\nPUSH1 3\nADD\nSTOP");
        assert_eq!(st.outcome, Outcome::Stop);
        assert_eq!(st.stack.len(), 1);
        assert_eq!(st.stack[0].as_concrete(), Some(U256::from(5)));
    }

    #[test]
    fn symbolic_add_keeps_taint() {
        let p = disassemble(&assemble("ADD").unwrap()).unwrap();
        let mut st = MachineState::new(CallEnv::default());
        let s = st.fresh(SymbolOrigin::CallValue, Taint::single(3));
        st.stack = vec![SymValue::from_u64(2), s.clone()];
        let out = step(st, &p, &());
        let top = out[0].top().unwrap();
        match top.kind() {
            crate::sym::SymKind::Expr { op, args } => {
                assert_eq!(*op, Op::Add);
                assert_eq!(args[0], s);
                assert_eq!(args[1].as_concrete(), Some(U256::from(2)));
            }
            k => panic!("expected expr, got {k:?}"),
        }
        assert!(top.taint().contains(3));
    }

    #[test]
    fn symbolic_jumpi_forks_false_then_true() {
        let p = disassemble(&assemble("PUSH1 0\nCALLDATALOAD\nPUSH1 @t\nJUMPI\nSTOP\nt:\nJUMPDEST\nSTOP").unwrap())
            .unwrap();
        let mut st = MachineState::new(CallEnv::default());
        for _ in 0..3 {
            st = step(st, &p, &()).pop().unwrap();
        }
        let out = step(st, &p, &());
        assert_eq!(out.len(), 2);
        assert!(!out[0].constraints[0].truth);
        assert!(out[1].constraints[0].truth);
        assert_eq!(out[0].constraints[0].value, out[1].constraints[0].value);
        assert_eq!(out[0].pc, 6);
        assert_eq!(out[1].pc, 7);
    }

    #[test]
    fn underflow_is_terminal() {
        let st = run_to_end("PUSH1 1\nADD");
        assert_eq!(st.outcome, Outcome::Error(ExecError::StackUnderflow));
    }

    #[test]
    fn symbolic_jump_target_is_terminal() {
        let st = run_to_end("PUSH1 0\nCALLDATALOAD\nJUMP");
        assert_eq!(st.outcome, Outcome::Error(ExecError::SymbolicJumpTarget));
    }

    #[test]
    fn invalid_jumpdest() {
        let st = run_to_end("PUSH1 3\nJUMP\nSTOP");
        assert_eq!(st.outcome, Outcome::Error(ExecError::InvalidJumpDest));
    }

    #[test]
    fn callvalue_from_env() {
        let p = disassemble(&assemble("CALLVALUE").unwrap()).unwrap();
        let env = CallEnv { callvalue: Some(U256::ZERO), ..Default::default() };
        let out = step(init_state(&p, env), &p, &());
        assert_eq!(out[0].top().unwrap().as_concrete(), Some(U256::ZERO));
        let out = step(init_state(&p, CallEnv::default()), &p, &());
        assert!(matches!(out[0].top().unwrap().kind(), crate::sym::SymKind::Symbol { .. }));
    }

    #[test]
    fn calldata_reads_share_a_symbol() {
        let st = run_to_end("PUSH1 4\nCALLDATALOAD\nPUSH1 4\nCALLDATALOAD\nSTOP");
        assert_eq!(st.stack[0], st.stack[1]);
    }

    #[test]
    fn symbolic_store_havocs_memory_with_taint_union() {
        let p = disassemble(&assemble("MSTORE\nPUSH1 0\nMLOAD\nSTOP").unwrap()).unwrap();
        let mut st = MachineState::new(CallEnv::default());
        let off = st.fresh(SymbolOrigin::CallValue, Taint::empty());
        let val = SymValue::concrete_tainted(U256::from(7), Taint::single(0));
        st.stack = vec![val, off];
        while !st.outcome.is_terminal() {
            st = step(st, &p, &()).pop().unwrap();
        }
        assert!(st.memory.havoc);
        let top = st.top().unwrap();
        assert!(matches!(top.kind(), crate::sym::SymKind::Symbol { origin: SymbolOrigin::Havoc { step: 2 }, .. }));
        assert!(top.taint().contains(0));
    }

    #[test]
    fn sha3_is_deterministic_in_region() {
        let st = run_to_end(
            "PUSH1 0\nCALLDATALOAD\nPUSH1 0\nMSTORE\nPUSH1 32\nPUSH1 0\nSHA3\nPUSH1 32\nPUSH1 0\nSHA3\nSTOP",
        );
        assert_eq!(st.stack[0], st.stack[1]);
        assert!(!st.stack[0].is_concrete());
    }

    #[test]
    fn running_off_the_end_stops() {
        let st = run_to_end("PUSH1 1");
        assert_eq!(st.outcome, Outcome::Stop);
        assert_eq!(st.trace, [0]);
    }
}
