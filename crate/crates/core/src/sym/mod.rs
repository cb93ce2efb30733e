//! Bounded symbolic execution over decoded EVM programs.
//!
//! Values carry taint sets of oracle origins. External calls are summarized:
//! the callee is classified through a [`CalleeClassifier`] and its results are
//! fresh symbols, tainted when the callee is a taint source.

mod exec;
mod explore;
mod feasible;
mod state;
mod value;

pub use exec::{step, step_with, StepOptions};
pub use explore::{explore, explore_with, ConfigError, Exploration, ExploreConfig, FeasibilityMode};
pub use feasible::{eval_interval, feasible, Feasibility, FeasibilityBackend, Interval, IntervalSolver, NoPruning};
pub use state::{
    init_state, BoundKind, CallEnv, CallKind, CalleeClass, CalleeClassifier, ExecError, ExternalCallRecord,
    MachineState, OriginInfo, Outcome, PathConstraint, Region, StorageWrite, STACK_LIMIT,
};
pub use value::{keccak_word, Op, OriginId, SymKind, SymValue, SymbolOrigin, Taint};
