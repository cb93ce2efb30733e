use std::collections::BTreeMap;

use num_bigint::BigUint;
use thiserror::Error;

use crate::types::Address;
use crate::U256;

use super::{Asset, Transfer};

/// Wei of native currency per token base unit, as `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rate {
    pub num: U256,
    pub den: U256,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValuationError {
    #[error("rate for {0} has a zero denominator")]
    ZeroDenominator(Address),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no rate configured for token {0}")]
pub struct UnknownAsset(pub Address);

/// Static token rates. Native currency is valued at 1:1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation {
    rates: BTreeMap<Address, Rate>,
}

impl Valuation {
    pub fn new(rates: impl IntoIterator<Item = (Address, Rate)>) -> Result<Self, ValuationError> {
        let rates: BTreeMap<_, _> = rates.into_iter().collect();
        if let Some((a, _)) = rates.iter().find(|(_, r)| r.den.is_zero()) {
            return Err(ValuationError::ZeroDenominator(*a));
        }
        Ok(Valuation { rates })
    }

    pub fn rate(&self, token: &Address) -> Option<Rate> {
        self.rates.get(token).copied()
    }

    /// `floor(amount * num / den)`, exact in unbounded precision.
    pub fn value(&self, asset: Asset, amount: U256) -> Result<BigUint, UnknownAsset> {
        let amount = to_big(amount);
        match asset {
            Asset::Native => Ok(amount),
            Asset::Token(a) => {
                let r = self.rates.get(&a).ok_or(UnknownAsset(a))?;
                Ok(amount * to_big(r.num) / to_big(r.den))
            }
        }
    }

    /// Value of `t` in wei, saturating at the 256-bit maximum.
    pub fn value_in_native(&self, t: &Transfer) -> Result<U256, UnknownAsset> {
        let v = self.value(t.asset, t.amount)?;
        let bytes = v.to_bytes_le();
        Ok(if bytes.len() > 32 { U256::MAX } else { U256::from_le_slice(&bytes) })
    }
}

pub(crate) fn to_big(v: U256) -> BigUint {
    BigUint::from_bytes_le(&v.to_le_bytes::<32>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token() -> Address {
        "0x00000000000000000000000000000000000000ee".parse().unwrap()
    }

    fn transfer(asset: Asset, amount: u64) -> Transfer {
        Transfer { asset, from: Address([1; 20]), to: Address([2; 20]), amount: U256::from(amount) }
    }

    fn val(num: u64, den: u64) -> Valuation {
        Valuation::new([(token(), Rate { num: U256::from(num), den: U256::from(den) })]).unwrap()
    }

    #[test]
    fn rates() {
        assert_eq!(val(2, 1).value_in_native(&transfer(Asset::Native, 5)), Ok(U256::from(5)));
        assert_eq!(val(2, 1).value_in_native(&transfer(Asset::Token(token()), 3)), Ok(U256::from(6)));
        assert_eq!(val(1, 3).value_in_native(&transfer(Asset::Token(token()), 10)), Ok(U256::from(3)));
        let other = Address([9; 20]);
        assert_eq!(val(1, 1).value_in_native(&transfer(Asset::Token(other), 1)), Err(UnknownAsset(other)));
    }

    #[test]
    fn wide_intermediate() {
        let v = Valuation::new([(token(), Rate { num: U256::MAX, den: U256::MAX })]).unwrap();
        let t = Transfer { amount: U256::MAX, ..transfer(Asset::Token(token()), 0) };
        assert_eq!(v.value_in_native(&t), Ok(U256::MAX));
    }

    #[test]
    fn zero_denominator() {
        let r = Valuation::new([(token(), Rate { num: U256::from(1), den: U256::ZERO })]);
        assert_eq!(r, Err(ValuationError::ZeroDenominator(token())));
    }
}
