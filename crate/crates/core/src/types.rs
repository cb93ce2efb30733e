use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::U256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expected 0x-prefixed {expected}-byte hex, got {got:?}")]
pub struct ParseHexError {
    pub expected: usize,
    pub got: String,
}

fn parse_fixed<const N: usize>(s: &str) -> Result<[u8; N], ParseHexError> {
    let err = || ParseHexError { expected: N, got: s.to_string() };
    let body = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).ok_or_else(err)?;
    if body.len() != 2 * N {
        return Err(err());
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(body, &mut out).map_err(|_| err())?;
    Ok(out)
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $n:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
        pub struct $name(pub [u8; $n]);

        impl FromStr for $name {
            type Err = ParseHexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_fixed::<$n>(s).map($name)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(self, f)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// 20-byte account address. Displayed as lowercase `0x` hex.
    Address,
    20
);

fixed_bytes!(
    /// 32-byte transaction hash.
    TxHash,
    32
);

impl Address {
    /// Address held in the low 160 bits of a word.
    pub fn from_word(w: U256) -> Address {
        let bytes: [u8; 32] = w.to_be_bytes();
        let mut out = [0u8; 20];
        out.copy_from_slice(&bytes[12..]);
        Address(out)
    }

    pub fn to_word(&self) -> U256 {
        let mut bytes = [0u8; 32];
        bytes[12..].copy_from_slice(&self.0);
        U256::from_be_bytes(bytes)
    }
}

/// Parses a decimal 256-bit quantity.
pub fn parse_u256_dec(s: &str) -> Option<U256> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    U256::from_str_radix(s, 10).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_parse_and_display() {
        let a: Address = "0x6B175474E89094C44Da98b954EedeAC495271d0F".parse().unwrap();
        assert_eq!(a.to_string(), "0x6b175474e89094c44da98b954eedeac495271d0f");
        assert!("6b175474e89094c44da98b954eedeac495271d0f".parse::<Address>().is_err());
        assert!("0x6b17".parse::<Address>().is_err());
    }

    #[test]
    fn word_round_trip_truncates_high_bits() {
        let a: Address = "0x00000000000000000000000000000000000000ff".parse().unwrap();
        assert_eq!(a.to_word(), U256::from(0xff));
        let w = (U256::from(1) << 200) | U256::from(0xff);
        assert_eq!(Address::from_word(w), a);
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_u256_dec("10"), Some(U256::from(10)));
        assert_eq!(parse_u256_dec(""), None);
        assert_eq!(parse_u256_dec("-1"), None);
        assert_eq!(parse_u256_dec("0x10"), None);
        assert_eq!(parse_u256_dec(&U256::MAX.to_string()), Some(U256::MAX));
        assert_eq!(parse_u256_dec("115792089237316195423570985008687907853269984665640564039457584007913129639936"), None);
    }
}
