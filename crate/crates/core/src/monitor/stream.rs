use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::tx::{Transaction, Valuation};
use crate::types::Address;

use super::{cluster, evaluate, ledger, Alert, RuleConfig, Rule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    /// Zero-based index of the transaction that broke stream order.
    #[error("transaction {position} is not after its predecessor")]
    OutOfOrderInput { position: usize },
}

/// Streaming monitor. Feed transactions in (block, index) order with
/// [`Monitor::push`], then call [`Monitor::finish`].
///
/// A target is evaluated once a later block shows its window is closed. The
/// buffer holds the blocks within `window_blocks` of the oldest pending
/// target, so at most `2 * window_blocks + 1` blocks.
#[derive(Clone, Debug)]
pub struct Monitor {
    rules: RuleConfig,
    valuation: Valuation,
    buffer: VecDeque<Transaction>,
    /// Buffer index of the next target to evaluate.
    next: usize,
    last: Option<(u64, u64)>,
    pushed: usize,
    emitted: BTreeSet<(u64, Address, Rule)>,
    /// (target block, sender) pairs already evaluated; their clusters repeat.
    evaluated: BTreeSet<(u64, Address)>,
}

impl Monitor {
    pub fn new(rules: RuleConfig, valuation: Valuation) -> Self {
        Monitor {
            rules,
            valuation,
            buffer: VecDeque::new(),
            next: 0,
            last: None,
            pushed: 0,
            emitted: BTreeSet::new(),
            evaluated: BTreeSet::new(),
        }
    }

    pub fn rules(&self) -> &RuleConfig {
        &self.rules
    }

    /// Accepts the next transaction and returns alerts for targets whose
    /// window closed.
    pub fn push(&mut self, tx: Transaction) -> Result<Vec<Alert>, MonitorError> {
        if self.last.is_some_and(|last| tx.position() <= last) {
            return Err(MonitorError::OutOfOrderInput { position: self.pushed });
        }
        let block = tx.block_number;
        self.last = Some(tx.position());
        self.pushed += 1;
        self.buffer.push_back(tx);
        let w = self.rules.window_blocks;
        let out = self.drain(|target| target.saturating_add(w) < block);
        self.evict();
        Ok(out)
    }

    /// Evaluates every remaining target.
    pub fn finish(&mut self) -> Vec<Alert> {
        let out = self.drain(|_| true);
        self.evict();
        out
    }

    fn drain(&mut self, ready: impl Fn(u64) -> bool) -> Vec<Alert> {
        let mut out = Vec::new();
        let pool = self.buffer.make_contiguous();
        while self.next < pool.len() && ready(pool[self.next].block_number) {
            let t0 = &pool[self.next];
            self.next += 1;
            if !self.evaluated.insert((t0.block_number, t0.sender)) {
                continue;
            }
            let c = cluster(t0, pool, self.rules.window_blocks);
            let l = ledger(&c, &self.valuation);
            for alert in evaluate(&c, &l, &self.rules) {
                if self.emitted.insert((alert.block_window.0, alert.sender, alert.rule)) {
                    out.push(alert);
                }
            }
        }
        out
    }

    fn evict(&mut self) {
        let w = self.rules.window_blocks;
        let oldest = match self.buffer.get(self.next) {
            Some(t) => t.block_number,
            None => match self.last {
                Some((block, _)) => block,
                None => return,
            },
        };
        let cutoff = oldest.saturating_sub(w);
        while self.buffer.front().is_some_and(|t| t.block_number < cutoff) {
            self.buffer.pop_front();
            self.next -= 1;
        }
        // later targets have windows starting at or above the cutoff
        self.emitted = self.emitted.split_off(&(cutoff, Address::default(), Rule::ProfitThreshold));
        self.evaluated = self.evaluated.split_off(&(oldest, Address::default()));
    }
}

/// Runs a fresh [`Monitor`] over a whole stream. Alerts are ordered by target
/// position.
pub fn run_monitor(
    stream: impl IntoIterator<Item = Transaction>,
    rules: &RuleConfig,
    valuation: &Valuation,
) -> Result<Vec<Alert>, MonitorError> {
    let mut m = Monitor::new(rules.clone(), valuation.clone());
    let mut out = Vec::new();
    for tx in stream {
        out.extend(m.push(tx)?);
    }
    out.extend(m.finish());
    Ok(out)
}
