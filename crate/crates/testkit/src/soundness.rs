//! Concrete-run coverage check for the symbolic explorer.

use blockeye_core::evm::disassemble;
use blockeye_core::sym::{explore, ExecError, ExploreConfig, MachineState, Outcome};

use crate::eval::{all_hold, concrete_lookup, eval};
use crate::interp::{run, ConcreteEnv, ConcreteRun, Fault, Status};

pub const MAX_STEPS: usize = 2_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Check {
    /// Some explored terminal covers the concrete run.
    Covered,
    /// The concrete run aborted or exploration was cut; nothing to compare.
    Skipped,
    Violation(String),
}

/// Exploration bounds high enough that loop-free test programs are never cut.
pub fn uncut_config() -> ExploreConfig {
    ExploreConfig { max_depth: MAX_STEPS * 2, max_paths: 1 << 16, loop_bound: 64, ..Default::default() }
}

fn same_status(run: Status, sym: Outcome) -> bool {
    matches!(
        (run, sym),
        (Status::Stop, Outcome::Stop)
            | (Status::Return, Outcome::Return)
            | (Status::Revert, Outcome::Revert)
            | (Status::Fault(Fault::StackUnderflow), Outcome::Error(ExecError::StackUnderflow))
            | (Status::Fault(Fault::StackOverflow), Outcome::Error(ExecError::StackOverflow))
            | (Status::Fault(Fault::BadJump), Outcome::Error(ExecError::InvalidJumpDest))
    )
}

/// Why `t` does not cover `r`, or `None` if it does.
pub fn mismatch(t: &MachineState, r: &ConcreteRun, env: &ConcreteEnv) -> Option<String> {
    if t.trace != r.trace {
        return Some("trace".into());
    }
    if !same_status(r.status, t.outcome) {
        return Some(format!("status {:?} vs {:?}", r.status, t.outcome));
    }
    let lookup = concrete_lookup(env, r);
    match all_hold(&t.constraints, &lookup) {
        Some(true) => {}
        Some(false) => return Some("constraints do not hold".into()),
        None => return Some("constraint not evaluable".into()),
    }
    if t.storage_writes.len() != r.storage_writes.len() {
        return Some("storage write count".into());
    }
    for (w, (site, slot, value)) in t.storage_writes.iter().zip(&r.storage_writes) {
        if w.site != *site || eval(&w.slot, &lookup) != Some(*slot) || eval(&w.value, &lookup) != Some(*value) {
            return Some(format!("storage write at {site}"));
        }
    }
    if t.call_log.len() != r.calls.len() {
        return Some("call count".into());
    }
    for (c, rc) in t.call_log.iter().zip(&r.calls) {
        if c.site != rc.site || eval(&c.callee, &lookup) != Some(rc.callee) || eval(&c.value, &lookup) != Some(rc.value) {
            return Some(format!("call at {}", rc.site));
        }
    }
    None
}

/// Runs `code` concretely under `env` and checks that exploration covers the
/// run.
pub fn check(code: &[u8], env: &ConcreteEnv) -> Check {
    let r = run(code, env, MAX_STEPS);
    if r.status == Status::Aborted {
        return Check::Skipped;
    }
    let program = match disassemble(code) {
        Ok(p) => p,
        Err(e) => return Check::Violation(format!("generated code does not decode: {e}")),
    };
    let ex = explore(&program, &uncut_config(), &());
    if ex.cuts() > 0 {
        return Check::Skipped;
    }
    let candidates: Vec<_> = ex.terminals.iter().filter(|t| t.trace == r.trace).collect();
    if candidates.is_empty() {
        return Check::Violation(format!("no terminal with trace {:?} ({:?})", r.trace, r.status));
    }
    let mut reasons = Vec::new();
    for t in candidates {
        match mismatch(t, &r, env) {
            None => return Check::Covered,
            Some(why) => reasons.push(why),
        }
    }
    Check::Violation(reasons.join("; "))
}
