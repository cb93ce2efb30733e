use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use serde_json::{json, Value};
use thiserror::Error;

use crate::types::{parse_u256_dec, Address, TxHash};
use crate::U256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    ProfitThreshold,
    Burst,
    Inconclusive,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::ProfitThreshold => "profit_threshold",
            Rule::Burst => "burst",
            Rule::Inconclusive => "inconclusive",
        }
    }
}

impl FromStr for Rule {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "profit_threshold" => Ok(Rule::ProfitThreshold),
            "burst" => Ok(Rule::Burst),
            "inconclusive" => Ok(Rule::Inconclusive),
            _ => Err(()),
        }
    }
}

/// A fired rule for one cluster. `txs` are the member hashes in stream order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alert {
    pub rule: Rule,
    pub sender: Address,
    pub block_window: (u64, u64),
    pub profit_wei: BigInt,
    pub threshold_wei: U256,
    pub txs: Vec<TxHash>,
}

impl Alert {
    /// One JSONL record without the trailing newline.
    pub fn to_jsonl(&self) -> String {
        json!({
            "rule": self.rule.as_str(),
            "sender": self.sender,
            "block_window": [self.block_window.0, self.block_window.1],
            "profit_wei": self.profit_wei.to_string(),
            "threshold_wei": self.threshold_wei.to_string(),
            "txs": self.txs,
        })
        .to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid alert field `{0}`")]
pub struct AlertParseError(pub &'static str);

/// Parses one alert record.
pub fn parse_alert(line: &str) -> Result<Alert, AlertParseError> {
    let v: Value = serde_json::from_str(line).map_err(|_| AlertParseError("<record>"))?;
    let get = |k: &'static str| v.get(k).ok_or(AlertParseError(k));
    let str_of = |k: &'static str| get(k)?.as_str().ok_or(AlertParseError(k));

    let rule = str_of("rule")?.parse().map_err(|_| AlertParseError("rule"))?;
    let sender = str_of("sender")?.parse().map_err(|_| AlertParseError("sender"))?;
    let window = get("block_window")?.as_array().ok_or(AlertParseError("block_window"))?;
    let block_window = match window.as_slice() {
        [lo, hi] => (
            lo.as_u64().ok_or(AlertParseError("block_window"))?,
            hi.as_u64().ok_or(AlertParseError("block_window"))?,
        ),
        _ => return Err(AlertParseError("block_window")),
    };
    let profit_wei = str_of("profit_wei")?.parse().map_err(|_| AlertParseError("profit_wei"))?;
    let threshold_wei = parse_u256_dec(str_of("threshold_wei")?).ok_or(AlertParseError("threshold_wei"))?;
    let txs = get("txs")?
        .as_array()
        .ok_or(AlertParseError("txs"))?
        .iter()
        .map(|h| h.as_str().and_then(|s| s.parse().ok()).ok_or(AlertParseError("txs")))
        .collect::<Result<_, _>>()?;
    Ok(Alert { rule, sender, block_window, profit_wei, threshold_wei, txs })
}

/// Senders ranked by alert count descending, then address ascending.
pub fn top_attackers(alerts: &[Alert], n: usize) -> Vec<(Address, usize)> {
    let mut counts: BTreeMap<Address, usize> = BTreeMap::new();
    for a in alerts {
        *counts.entry(a.sender).or_default() += 1;
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    // stable sort keeps the address order among ties
    ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
    ranked.truncate(n);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alert(sender: u8) -> Alert {
        Alert {
            rule: Rule::ProfitThreshold,
            sender: Address([sender; 20]),
            block_window: (3, 5),
            profit_wei: BigInt::from(-12),
            threshold_wei: U256::from(10),
            txs: vec![TxHash([7; 32])],
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let a = alert(1);
        let line = a.to_jsonl();
        assert!(line.contains(r#""profit_wei":"-12""#));
        assert_eq!(parse_alert(&line), Ok(a));
        assert_eq!(parse_alert("{}"), Err(AlertParseError("rule")));
    }

    #[test]
    fn ranking() {
        assert_eq!(top_attackers(&[], 3), []);
        let (x, y) = (Address([1; 20]), Address([2; 20]));
        let alerts = [alert(2), alert(1), alert(1), alert(1)];
        assert_eq!(top_attackers(&alerts, 2), [(x, 3), (y, 1)]);
        let tie = [alert(2), alert(1), alert(2), alert(1)];
        assert_eq!(top_attackers(&tie, 5), [(x, 2), (y, 2)]);
        assert_eq!(top_attackers(&tie, 1), [(x, 2)]);
    }
}
