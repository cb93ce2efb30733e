use num_bigint::{BigInt, BigUint};

use crate::tx::{to_big, Status, Transaction, Valuation};
use crate::types::Address;

use super::Cluster;

/// Benefit and cost of one address, valued in wei.
///
/// Benefit is inflows. Cost is outflows plus every gas fee the address paid,
/// reverted transactions included. Transfers of unpriced tokens are left out
/// of both sums and set `unvaluable`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProfitLedger {
    pub benefit: BigUint,
    pub cost: BigUint,
    pub unvaluable: bool,
}

impl ProfitLedger {
    pub fn profit(&self) -> BigInt {
        BigInt::from(self.benefit.clone()) - BigInt::from(self.cost.clone())
    }

    /// Ledger of `addr` over `txs`.
    ///
    /// Only successful transactions move value. Top-level value counts only
    /// when no matching native edge exists. When `addr` is `coinbase` it also
    /// receives every fee.
    pub fn for_address(addr: Address, txs: &[Transaction], v: &Valuation, coinbase: Option<Address>) -> Self {
        let mut l = ProfitLedger::default();
        for tx in txs {
            let fee = to_big(tx.gas_price) * tx.gas_used;
            if tx.sender == addr {
                l.cost += &fee;
            }
            if coinbase == Some(addr) {
                l.benefit += &fee;
            }
            if tx.status == Status::Reverted {
                continue;
            }
            if !tx.value.is_zero() && !tx.value_has_edge() {
                let value = to_big(tx.value);
                if tx.sender == addr {
                    l.cost += &value;
                }
                if tx.to == Some(addr) {
                    l.benefit += value;
                }
            }
            for t in &tx.transfers {
                if t.from != addr && t.to != addr {
                    continue;
                }
                match v.value(t.asset, t.amount) {
                    Ok(w) if t.to == addr => l.benefit += w,
                    Ok(w) => l.cost += w,
                    Err(_) => l.unvaluable = true,
                }
            }
        }
        l
    }
}

/// Ledger of the cluster sender over the cluster members.
pub fn ledger(c: &Cluster, v: &Valuation) -> ProfitLedger {
    ProfitLedger::for_address(c.sender, &c.members, v, None)
}
