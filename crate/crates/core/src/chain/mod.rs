//! Transaction sources feeding the monitor.

mod file;
mod rpc;

pub use file::FileSource;
pub use rpc::{RetryPolicy, RpcClient, RpcSource};

use std::io;

use thiserror::Error;

use crate::tx::{SchemaError, Transaction};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {source}")]
    Schema { line: usize, source: SchemaError },
    #[error("line {line}: transaction is not after its predecessor")]
    OutOfOrderInput { line: usize },
    #[error("rpc error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed rpc response: {0}")]
    Malformed(String),
    #[error("gave up after {0} attempts: {1}")]
    RetriesExhausted(u32, Box<ChainError>),
}

/// Last delivered stream position.
pub type Cursor = Option<(u64, u64)>;

/// A source of transactions ordered by (block, index).
pub trait StreamSource {
    /// Transactions after the cursor. `None` once the source is exhausted;
    /// live sources never end.
    fn next_batch(&mut self) -> Result<Option<Vec<Transaction>>, ChainError>;

    fn cursor(&self) -> Cursor;
}
