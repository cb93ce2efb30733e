//! The shared TOML configuration read by `analyze` and `monitor`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use blockeye_core::monitor::RuleConfig;
use blockeye_core::oracle::{AddressBook, BookError};
use blockeye_core::sym::{ConfigError as BoundsError, ExploreConfig};
use blockeye_core::tx::{Rate, Valuation, ValuationError};
use blockeye_core::types::parse_u256_dec;
use blockeye_core::{Address, U256};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("{field}: {reason}")]
    Field { field: String, reason: String },
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// A non-negative integer written either as a TOML integer or a decimal string.
#[derive(Deserialize, Clone, Debug)]
#[serde(untagged)]
enum Quantity {
    Int(u64),
    Text(String),
}

impl Quantity {
    fn value(&self, field: &str) -> Result<U256, ConfigError> {
        match self {
            Quantity::Int(n) => Ok(U256::from(*n)),
            Quantity::Text(s) => parse_u256_dec(s).ok_or_else(|| ConfigError::Field {
                field: field.to_string(),
                reason: format!("expected a decimal integer, got {s:?}"),
            }),
        }
    }
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct TokenEntry {
    #[serde(default)]
    symbol: Option<String>,
    rate_num: Quantity,
    rate_den: Quantity,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    oracles: Vec<String>,
    #[serde(default)]
    tokens: BTreeMap<String, TokenEntry>,
    threshold_wei: Quantity,
    #[serde(default)]
    window_blocks: u64,
    #[serde(default = "default_min_burst")]
    min_burst: usize,
    max_depth: Option<usize>,
    max_paths: Option<usize>,
    loop_bound: Option<u32>,
    #[serde(default)]
    wildcard_oracle: bool,
    #[serde(default = "default_confirmations")]
    confirmation_depth: u64,
}

fn default_min_burst() -> usize {
    2
}

fn default_confirmations() -> u64 {
    6
}

/// Validated configuration.
#[derive(Clone, Debug)]
pub struct Config {
    pub book: AddressBook,
    pub valuation: Valuation,
    /// Token symbols by address, for display.
    pub symbols: BTreeMap<Address, String>,
    pub rules: RuleConfig,
    pub explore: ExploreConfig,
    pub confirmation_depth: u64,
}

fn address(field: &str, s: &str) -> Result<Address, ConfigError> {
    s.to_ascii_lowercase()
        .parse()
        .map_err(|e| ConfigError::Field { field: field.to_string(), reason: format!("{e}") })
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let oracles = raw
            .oracles
            .iter()
            .map(|s| address("oracles", s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rates = Vec::new();
        let mut symbols = BTreeMap::new();
        for (key, entry) in &raw.tokens {
            let field = format!("tokens.{key}");
            let a = address(&field, key)?;
            rates.push((
                a,
                Rate {
                    num: entry.rate_num.value(&format!("{field}.rate_num"))?,
                    den: entry.rate_den.value(&format!("{field}.rate_den"))?,
                },
            ));
            if let Some(sym) = &entry.symbol {
                symbols.insert(a, sym.clone());
            }
        }
        let book = AddressBook::new(oracles, rates.iter().map(|(a, _)| *a), raw.wildcard_oracle)?;
        let valuation = Valuation::new(rates)?;
        let defaults = ExploreConfig::default();
        let explore = ExploreConfig {
            max_depth: raw.max_depth.unwrap_or(defaults.max_depth),
            max_paths: raw.max_paths.unwrap_or(defaults.max_paths),
            loop_bound: raw.loop_bound.unwrap_or(defaults.loop_bound),
            ..defaults
        };
        explore.validate()?;
        if raw.min_burst == 0 {
            return Err(ConfigError::Field { field: "min_burst".into(), reason: "must be at least 1".into() });
        }
        let rules = RuleConfig {
            threshold_wei: raw.threshold_wei.value("threshold_wei")?,
            min_burst: raw.min_burst,
            window_blocks: raw.window_blocks,
        };
        Ok(Config { book, valuation, symbols, rules, explore, confirmation_depth: raw.confirmation_depth })
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Config::parse(&text)
    }
}
