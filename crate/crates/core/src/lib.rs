//! Two-phase DeFi attack detection.
//!
//! Phase one ([`oracle`]) symbolically executes contract bytecode and reports
//! state updates whose values flow from an external price-oracle call. Phase
//! two ([`monitor`]) watches a transaction stream, clusters each sender's
//! transactions around a target, computes a profit ledger and raises alerts
//! when configured heuristics are violated.

pub mod chain;
pub mod evm;
pub mod monitor;
pub mod oracle;
pub mod sym;
pub mod tx;
pub mod types;

pub use types::{Address, TxHash};

/// 256-bit unsigned machine word.
pub use ruint::aliases::U256;
