//! Attack monitoring over a transaction stream.
//!
//! Every transaction is a candidate target. Its sender's transactions within
//! `window_blocks` of the target block form a cluster; the cluster's profit
//! ledger is checked against the configured rules.

mod alert;
mod ledger;
mod stream;

pub use alert::{parse_alert, top_attackers, Alert, AlertParseError, Rule};
pub use ledger::{ledger, ProfitLedger};
pub use stream::{run_monitor, Monitor, MonitorError};

use num_bigint::BigInt;

use crate::tx::{to_big, Transaction};
use crate::types::Address;
use crate::U256;

/// A sender's transactions around a target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub target: Transaction,
    /// Sorted by stream position; contains the target.
    pub members: Vec<Transaction>,
    pub sender: Address,
    /// Inclusive block range.
    pub block_window: (u64, u64),
}

/// Members of `pool` sent by the target's sender at most `window_blocks`
/// blocks from the target. A window of 0 keeps the target block only.
pub fn cluster(t0: &Transaction, pool: &[Transaction], window_blocks: u64) -> Cluster {
    let low = t0.block_number.saturating_sub(window_blocks);
    let high = t0.block_number.saturating_add(window_blocks);
    let mut members: Vec<Transaction> = pool
        .iter()
        .filter(|t| t.sender == t0.sender && (low..=high).contains(&t.block_number))
        .cloned()
        .collect();
    members.sort_by_key(Transaction::position);
    Cluster { target: t0.clone(), members, sender: t0.sender, block_window: (low, high) }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleConfig {
    /// Profit must exceed this strictly.
    pub threshold_wei: U256,
    /// Cluster size that triggers a burst alert.
    pub min_burst: usize,
    pub window_blocks: u64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig { threshold_wei: U256::ZERO, min_burst: 2, window_blocks: 0 }
    }
}

/// Alerts raised for one cluster. An unvaluable ledger yields only an
/// inconclusive alert.
pub fn evaluate(c: &Cluster, l: &ProfitLedger, rules: &RuleConfig) -> Vec<Alert> {
    let profit = l.profit();
    let alert = |rule| Alert {
        rule,
        sender: c.sender,
        block_window: c.block_window,
        profit_wei: profit.clone(),
        threshold_wei: rules.threshold_wei,
        txs: c.members.iter().map(|m| m.hash).collect(),
    };
    if l.unvaluable {
        return vec![alert(Rule::Inconclusive)];
    }
    let mut out = Vec::new();
    if profit > BigInt::from(to_big(rules.threshold_wei)) {
        out.push(alert(Rule::ProfitThreshold));
    }
    if c.members.len() >= rules.min_burst {
        out.push(alert(Rule::Burst));
    }
    out
}
