use std::time::Duration;

use serde_json::{json, Value};

use crate::tx::{Asset, Status, Transaction, Transfer};
use crate::types::{Address, TxHash};
use crate::U256;

use super::{ChainError, Cursor, StreamSource};

/// Exponential backoff for transient failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    pub initial: Duration,
    pub cap: Duration,
    /// `None` retries forever.
    pub max_attempts: Option<u32>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { initial: Duration::from_secs(1), cap: Duration::from_secs(60), max_attempts: None }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (zero-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(31)).unwrap_or(u32::MAX);
        self.initial.saturating_mul(factor).min(self.cap)
    }
}

type Sleeper = Box<dyn FnMut(Duration) + Send>;

/// Minimal JSON-RPC 2.0 client over HTTP.
pub struct RpcClient {
    url: String,
    http: reqwest::blocking::Client,
    policy: RetryPolicy,
    sleep: Sleeper,
    next_id: u64,
}

impl RpcClient {
    pub fn new(url: &str) -> Self {
        RpcClient {
            url: url.to_string(),
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(30))
                .build()
                .expect("http client builds"),
            policy: RetryPolicy::default(),
            sleep: Box::new(std::thread::sleep),
            next_id: 1,
        }
    }

    pub fn with_retry(mut self, policy: RetryPolicy, sleep: impl FnMut(Duration) + Send + 'static) -> Self {
        self.policy = policy;
        self.sleep = Box::new(sleep);
        self
    }

    fn attempt(&mut self, method: &str, params: &Value) -> Result<Value, ChainError> {
        let id = self.next_id;
        self.next_id += 1;
        let body = json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params});
        let resp = self
            .http
            .post(&self.url)
            .json(&body)
            .send()
            .map_err(|e| ChainError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ChainError::Transport(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(ChainError::Transport(format!("http {status}")));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ChainError::Malformed(e.to_string()))?;
        if let Some(err) = v.get("error") {
            return Err(ChainError::Rpc {
                code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
                message: err.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
            });
        }
        v.get("result").cloned().ok_or_else(|| ChainError::Malformed("missing result".into()))
    }

    /// Calls `method`, retrying transport and RPC errors per the policy.
    /// Malformed responses are not retried.
    pub fn call(&mut self, method: &str, params: Value) -> Result<Value, ChainError> {
        let mut attempt = 0;
        loop {
            match self.attempt(method, &params) {
                Ok(v) => return Ok(v),
                Err(e @ ChainError::Malformed(_)) => return Err(e),
                Err(e) => {
                    if self.policy.max_attempts.is_some_and(|m| attempt + 1 >= m) {
                        return Err(ChainError::RetriesExhausted(attempt + 1, Box::new(e)));
                    }
                    log::warn!("{method} failed, retrying: {e}");
                    (self.sleep)(self.policy.delay(attempt));
                    attempt += 1;
                }
            }
        }
    }

    pub fn block_number(&mut self) -> Result<u64, ChainError> {
        let v = self.call("eth_blockNumber", json!([]))?;
        quantity_u64(&v, "eth_blockNumber")
    }

    pub fn get_code(&mut self, address: Address) -> Result<Vec<u8>, ChainError> {
        let v = self.call("eth_getCode", json!([address, "latest"]))?;
        let s = v.as_str().ok_or_else(|| ChainError::Malformed("eth_getCode result".into()))?;
        hex::decode(s.trim_start_matches("0x")).map_err(|e| ChainError::Malformed(e.to_string()))
    }
}

fn quantity(v: &Value, what: &str) -> Result<U256, ChainError> {
    let bad = || ChainError::Malformed(format!("{what}: expected hex quantity"));
    let s = v.as_str().ok_or_else(bad)?;
    let body = s.strip_prefix("0x").ok_or_else(bad)?;
    if body.is_empty() {
        return Err(bad());
    }
    U256::from_str_radix(body, 16).map_err(|_| bad())
}

fn quantity_u64(v: &Value, what: &str) -> Result<u64, ChainError> {
    u64::try_from(quantity(v, what)?).map_err(|_| ChainError::Malformed(format!("{what}: out of range")))
}

fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value, ChainError> {
    v.get(name).ok_or_else(|| ChainError::Malformed(format!("missing {name}")))
}

fn parse<T: std::str::FromStr>(v: &Value, name: &str) -> Result<T, ChainError> {
    v.as_str()
        .and_then(|s| s.to_ascii_lowercase().parse().ok())
        .ok_or_else(|| ChainError::Malformed(format!("bad {name}")))
}

/// Block poller trailing the head by a confirmation depth. Only native value
/// is recorded; token transfers in logs are not decoded.
pub struct RpcSource {
    client: RpcClient,
    next_block: Option<u64>,
    confirmations: u64,
    cursor: Cursor,
}

impl RpcSource {
    /// Starts at `start_block`, or at the confirmed head when `None`.
    pub fn new(client: RpcClient, start_block: Option<u64>, confirmations: u64) -> Self {
        RpcSource { client, next_block: start_block, confirmations, cursor: None }
    }

    fn fetch_block(&mut self, number: u64) -> Result<Vec<Transaction>, ChainError> {
        let block = self.client.call("eth_getBlockByNumber", json!([format!("{number:#x}"), true]))?;
        let txs = field(&block, "transactions")?
            .as_array()
            .ok_or_else(|| ChainError::Malformed("transactions".into()))?;
        let mut out = Vec::with_capacity(txs.len());
        for t in txs {
            let hash: TxHash = parse(field(t, "hash")?, "hash")?;
            let receipt = self.client.call("eth_getTransactionReceipt", json!([hash]))?;
            let status = match quantity_u64(field(&receipt, "status")?, "status")? {
                1 => Status::Success,
                _ => Status::Reverted,
            };
            let gas_price = match receipt.get("effectiveGasPrice").filter(|v| !v.is_null()) {
                Some(p) => quantity(p, "effectiveGasPrice")?,
                None => quantity(field(t, "gasPrice")?, "gasPrice")?,
            };
            let sender: Address = parse(field(t, "from")?, "from")?;
            let to: Option<Address> = match t.get("to") {
                None | Some(Value::Null) => None,
                Some(v) => Some(parse(v, "to")?),
            };
            let value = quantity(field(t, "value")?, "value")?;
            let transfers = match to {
                Some(to) if status == Status::Success && !value.is_zero() && to != sender => {
                    vec![Transfer { asset: Asset::Native, from: sender, to, amount: value }]
                }
                _ => vec![],
            };
            out.push(Transaction {
                hash,
                block_number: number,
                tx_index: quantity_u64(field(t, "transactionIndex")?, "transactionIndex")?,
                sender,
                to,
                value,
                gas_used: quantity_u64(field(&receipt, "gasUsed")?, "gasUsed")?,
                gas_price,
                status,
                transfers,
            });
        }
        out.sort_by_key(Transaction::position);
        Ok(out)
    }
}

impl StreamSource for RpcSource {
    /// One confirmed block per call, or an empty batch when none is ready.
    fn next_batch(&mut self) -> Result<Option<Vec<Transaction>>, ChainError> {
        let safe = self.client.block_number()?.saturating_sub(self.confirmations);
        let next = *self.next_block.get_or_insert(safe);
        if next > safe {
            return Ok(Some(vec![]));
        }
        let batch = self.fetch_block(next)?;
        self.next_block = Some(next + 1);
        if let Some(last) = batch.last() {
            self.cursor = Some(last.position());
        }
        Ok(Some(batch))
    }

    fn cursor(&self) -> Cursor {
        self.cursor
    }
}
