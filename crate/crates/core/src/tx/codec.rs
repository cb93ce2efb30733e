use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::types::{parse_u256_dec, Address, TxHash};
use crate::U256;

use super::{Asset, Status, Transaction, Transfer};

/// A fixture record violates the schema. `field` names the first offending
/// field, dotted for nested transfer fields.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid field `{field}`: {reason}")]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

impl SchemaError {
    fn new(field: &str, reason: impl Into<String>) -> Self {
        SchemaError { field: field.to_string(), reason: reason.into() }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {source}")]
    Schema { line: usize, source: SchemaError },
    #[error("line {line}: duplicate position (block {block}, index {index})")]
    Duplicate { line: usize, block: u64, index: u64 },
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value, SchemaError> {
    obj.get(name).ok_or_else(|| SchemaError::new(name, "missing"))
}

fn as_u64(v: &Value, name: &str) -> Result<u64, SchemaError> {
    match v {
        Value::Number(n) => n.as_u64().ok_or_else(|| SchemaError::new(name, "expected unsigned integer")),
        Value::String(s) => s.parse().map_err(|_| SchemaError::new(name, "expected unsigned integer")),
        _ => Err(SchemaError::new(name, "expected unsigned integer")),
    }
}

fn as_u256(v: &Value, name: &str) -> Result<U256, SchemaError> {
    match v {
        Value::String(s) => parse_u256_dec(s).ok_or_else(|| SchemaError::new(name, "expected decimal string")),
        Value::Number(n) => n.as_u64().map(U256::from).ok_or_else(|| SchemaError::new(name, "expected decimal string")),
        _ => Err(SchemaError::new(name, "expected decimal string")),
    }
}

fn as_str<'a>(v: &'a Value, name: &str) -> Result<&'a str, SchemaError> {
    v.as_str().ok_or_else(|| SchemaError::new(name, "expected string"))
}

fn as_addr(v: &Value, name: &str) -> Result<Address, SchemaError> {
    as_str(v, name)?.parse().map_err(|e: crate::types::ParseHexError| SchemaError::new(name, e.to_string()))
}

fn parse_transfer(v: &Value) -> Result<Transfer, SchemaError> {
    let obj = v.as_object().ok_or_else(|| SchemaError::new("transfers", "expected object"))?;
    let get = |name: &str| obj.get(name).ok_or_else(|| SchemaError::new(&format!("transfers.{name}"), "missing"));
    let asset = match as_str(get("asset")?, "transfers.asset")? {
        "native" => Asset::Native,
        other => Asset::Token(
            other.parse().map_err(|_| SchemaError::new("transfers.asset", "expected \"native\" or an address"))?,
        ),
    };
    let t = Transfer {
        asset,
        from: as_addr(get("from")?, "transfers.from")?,
        to: as_addr(get("to")?, "transfers.to")?,
        amount: as_u256(get("amount")?, "transfers.amount")?,
    };
    if t.amount.is_zero() {
        return Err(SchemaError::new("transfers.amount", "must be positive"));
    }
    if t.from == t.to {
        return Err(SchemaError::new("transfers.to", "equals transfers.from"));
    }
    Ok(t)
}

/// Parses one JSONL record. Unknown fields are ignored.
pub fn parse_fixture(line: &str) -> Result<Transaction, SchemaError> {
    let v: Value = serde_json::from_str(line).map_err(|e| SchemaError::new("<record>", e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| SchemaError::new("<record>", "expected object"))?;

    let hash: TxHash = as_str(field(obj, "hash")?, "hash")?
        .parse()
        .map_err(|e: crate::types::ParseHexError| SchemaError::new("hash", e.to_string()))?;
    let block_number = as_u64(field(obj, "block_number")?, "block_number")?;
    let tx_index = as_u64(field(obj, "tx_index")?, "tx_index")?;
    let sender = as_addr(field(obj, "from")?, "from")?;
    let to = match obj.get("to") {
        None | Some(Value::Null) => None,
        Some(v) => Some(as_addr(v, "to")?),
    };
    let value = as_u256(field(obj, "value")?, "value")?;
    let gas_used = as_u64(field(obj, "gas_used")?, "gas_used")?;
    let gas_price = as_u256(field(obj, "gas_price")?, "gas_price")?;
    let status = match as_str(field(obj, "status")?, "status")? {
        "success" => Status::Success,
        "reverted" => Status::Reverted,
        _ => return Err(SchemaError::new("status", "expected \"success\" or \"reverted\"")),
    };
    let transfers = match field(obj, "transfers")? {
        Value::Array(items) => items.iter().map(parse_transfer).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(SchemaError::new("transfers", "expected array")),
    };
    if status == Status::Reverted && !transfers.is_empty() {
        return Err(SchemaError::new("transfers", "reverted transactions move no value"));
    }
    Ok(Transaction { hash, block_number, tx_index, sender, to, value, gas_used, gas_price, status, transfers })
}

/// Serializes a transaction as one JSONL record without the trailing newline.
pub fn to_jsonl(tx: &Transaction) -> String {
    let transfers: Vec<Value> = tx
        .transfers
        .iter()
        .map(|t| {
            let asset = match t.asset {
                Asset::Native => "native".to_string(),
                Asset::Token(a) => a.to_string(),
            };
            json!({"asset": asset, "from": t.from, "to": t.to, "amount": t.amount.to_string()})
        })
        .collect();
    json!({
        "hash": tx.hash,
        "block_number": tx.block_number,
        "tx_index": tx.tx_index,
        "from": tx.sender,
        "to": tx.to,
        "value": tx.value.to_string(),
        "gas_used": tx.gas_used,
        "gas_price": tx.gas_price.to_string(),
        "status": match tx.status { Status::Success => "success", Status::Reverted => "reverted" },
        "transfers": transfers,
    })
    .to_string()
}

/// Opens a text file, transparently decompressing gzip input.
pub fn open_lines(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = read_up_to(&mut file, &mut magic)?;
    let head = io::Cursor::new(magic[..n].to_vec());
    let chained = head.chain(file);
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(GzDecoder::new(chained))))
    } else {
        Ok(Box::new(BufReader::new(chained)))
    }
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

/// Loads a whole fixture file. Blank lines are skipped; positions must be
/// unique.
pub fn load_dataset(path: &Path) -> Result<Vec<Transaction>, DatasetError> {
    let io_err = |source| DatasetError::Io { path: path.display().to_string(), source };
    let reader = open_lines(path).map_err(io_err)?;
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let tx = parse_fixture(&line).map_err(|source| DatasetError::Schema { line: i + 1, source })?;
        if seen.insert(tx.position(), i + 1).is_some() {
            return Err(DatasetError::Duplicate { line: i + 1, block: tx.block_number, index: tx.tx_index });
        }
        out.push(tx);
    }
    Ok(out)
}
