use thiserror::Error;

use crate::evm::opcode::JUMPDEST;
use crate::evm::Program;

use super::exec::{step_with, StepOptions};
use super::feasible::{Feasibility, FeasibilityBackend, IntervalSolver, NoPruning};
use super::state::{BoundKind, CallEnv, CalleeClassifier, MachineState, Outcome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeasibilityMode {
    /// Built-in interval evaluator.
    #[default]
    Interval,
    /// Keep every path.
    Off,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExploreConfig {
    /// Instructions executed per path.
    pub max_depth: usize,
    /// Terminal states kept.
    pub max_paths: usize,
    /// Executions of any one JUMPDEST per path.
    pub loop_bound: u32,
    pub feasibility: FeasibilityMode,
    pub control_taint: bool,
    pub env: CallEnv,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            max_depth: 4096,
            max_paths: 256,
            loop_bound: 2,
            feasibility: FeasibilityMode::Interval,
            control_taint: false,
            env: CallEnv::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    ZeroBound(&'static str),
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_depth == 0 {
            return Err(ConfigError::ZeroBound("max_depth"));
        }
        if self.max_paths == 0 {
            return Err(ConfigError::ZeroBound("max_paths"));
        }
        if self.loop_bound == 0 {
            return Err(ConfigError::ZeroBound("loop_bound"));
        }
        Ok(())
    }
}

/// Result of one exploration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Exploration {
    /// Terminal states in completion order.
    pub terminals: Vec<MachineState>,
    /// Branches dropped because their constraints were infeasible.
    pub pruned: usize,
    /// States left unexplored after the path cap was hit.
    pub abandoned: usize,
}

impl Exploration {
    /// Paths cut by a bound (depth or loop), plus abandoned work.
    pub fn cuts(&self) -> usize {
        self.abandoned
            + self
                .terminals
                .iter()
                .filter(|t| matches!(t.outcome, Outcome::BoundCut(_)))
                .count()
    }
}

/// Depth-first bounded exploration of `program`.
pub fn explore(program: &Program, config: &ExploreConfig, hooks: &dyn CalleeClassifier) -> Exploration {
    match config.feasibility {
        FeasibilityMode::Interval => explore_with(program, config, hooks, &IntervalSolver::default()),
        FeasibilityMode::Off => explore_with(program, config, hooks, &NoPruning),
    }
}

/// [`explore`] with a caller-supplied feasibility backend.
pub fn explore_with(
    program: &Program,
    config: &ExploreConfig,
    hooks: &dyn CalleeClassifier,
    backend: &dyn FeasibilityBackend,
) -> Exploration {
    let opts = StepOptions { control_taint: config.control_taint };
    let mut out = Exploration::default();
    let mut work = vec![MachineState::new(config.env.clone())];

    while let Some(mut state) = work.pop() {
        if out.terminals.len() >= config.max_paths {
            out.abandoned = work.len() + 1;
            break;
        }
        if state.outcome.is_terminal() {
            out.terminals.push(state);
            continue;
        }
        if state.trace.len() >= config.max_depth {
            state.outcome = Outcome::BoundCut(BoundKind::Depth);
            out.terminals.push(state);
            continue;
        }
        if let Some(ins) = program.at(state.pc) {
            if ins.opcode.code == JUMPDEST
                && state.jumpdest_visits.get(&state.pc).copied().unwrap_or(0) >= config.loop_bound
            {
                state.outcome = Outcome::BoundCut(BoundKind::LoopBound);
                out.terminals.push(state);
                continue;
            }
        }

        let mut succs = step_with(state, program, hooks, opts);
        if succs.len() > 1 {
            let before = succs.len();
            succs.retain(|s| backend.check(&s.constraints) != Feasibility::Infeasible);
            out.pruned += before - succs.len();
        }
        // LIFO: push in reverse so the false branch is explored first
        work.extend(succs.into_iter().rev());
    }
    out
}
