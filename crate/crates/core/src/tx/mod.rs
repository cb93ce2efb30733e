//! Monitored transactions and their asset-transfer edges.
//!
//! Fixtures are JSONL, one transaction per line, optionally gzip-compressed.
//! 256-bit quantities are decimal strings and addresses are `0x` hex.

mod codec;
mod valuation;

pub use codec::{load_dataset, open_lines, parse_fixture, to_jsonl, DatasetError, SchemaError};
pub(crate) use valuation::to_big;
pub use valuation::{Rate, UnknownAsset, Valuation, ValuationError};

use crate::types::{Address, TxHash};
use crate::U256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Asset {
    Native,
    Token(Address),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Success,
    Reverted,
}

/// One asset movement inside a transaction. `amount` is in base units.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transfer {
    pub asset: Asset,
    pub from: Address,
    pub to: Address,
    pub amount: U256,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub hash: TxHash,
    pub block_number: u64,
    pub tx_index: u64,
    pub sender: Address,
    /// `None` for contract creation.
    pub to: Option<Address>,
    /// Top-level value in wei.
    pub value: U256,
    pub gas_used: u64,
    pub gas_price: U256,
    pub status: Status,
    /// Empty when reverted.
    pub transfers: Vec<Transfer>,
}

impl Transaction {
    /// Stream position.
    pub fn position(&self) -> (u64, u64) {
        (self.block_number, self.tx_index)
    }

    /// Gas fee in wei. Paid regardless of status.
    pub fn fee(&self) -> U256 {
        U256::from(self.gas_used).saturating_mul(self.gas_price)
    }

    /// Whether the top-level value already appears as a native transfer edge
    /// from the sender to the recipient.
    pub fn value_has_edge(&self) -> bool {
        let Some(to) = self.to else { return false };
        self.transfers
            .iter()
            .any(|t| t.asset == Asset::Native && t.from == self.sender && t.to == to && t.amount == self.value)
    }
}
