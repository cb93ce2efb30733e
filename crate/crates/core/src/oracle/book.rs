use std::collections::BTreeSet;

use thiserror::Error;

use crate::sym::{CalleeClass, CalleeClassifier, SymValue};
use crate::types::Address;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error("address {0} is listed both as an oracle and as a token")]
    Overlap(Address),
}

/// Configured oracle and token addresses.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AddressBook {
    oracles: BTreeSet<Address>,
    tokens: BTreeSet<Address>,
    wildcard_oracle: bool,
}

impl AddressBook {
    pub fn new(
        oracles: impl IntoIterator<Item = Address>,
        tokens: impl IntoIterator<Item = Address>,
        wildcard_oracle: bool,
    ) -> Result<AddressBook, BookError> {
        let oracles: BTreeSet<_> = oracles.into_iter().collect();
        let tokens: BTreeSet<_> = tokens.into_iter().collect();
        if let Some(a) = oracles.intersection(&tokens).next() {
            return Err(BookError::Overlap(*a));
        }
        Ok(AddressBook { oracles, tokens, wildcard_oracle })
    }

    pub fn oracles(&self) -> &BTreeSet<Address> {
        &self.oracles
    }

    pub fn tokens(&self) -> &BTreeSet<Address> {
        &self.tokens
    }

    pub fn wildcard_oracle(&self) -> bool {
        self.wildcard_oracle
    }
}

/// Classifies a callee against the address book.
///
/// Concrete callees are matched on their low 160 bits. A symbolic callee is an
/// oracle only in wildcard mode.
pub fn classify_callee(addr: &SymValue, book: &AddressBook) -> CalleeClass {
    match addr.as_concrete() {
        Some(w) => {
            let a = Address::from_word(w);
            if book.oracles.contains(&a) {
                CalleeClass::Oracle
            } else if book.tokens.contains(&a) {
                CalleeClass::Token
            } else {
                CalleeClass::Unknown
            }
        }
        None if book.wildcard_oracle => CalleeClass::Oracle,
        None => CalleeClass::Unknown,
    }
}

impl CalleeClassifier for AddressBook {
    fn classify(&self, callee: &SymValue) -> CalleeClass {
        classify_callee(callee, self)
    }

    /// In wildcard mode every callee that is not a known token is a source.
    fn is_source(&self, class: CalleeClass) -> bool {
        match class {
            CalleeClass::Oracle => true,
            CalleeClass::Unknown => self.wildcard_oracle,
            CalleeClass::Token => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::{SymbolOrigin, Taint};

    fn addr(last: u8) -> Address {
        let mut a = [0u8; 20];
        a[19] = last;
        Address(a)
    }

    #[test]
    fn classification() {
        let book = AddressBook::new([addr(1)], [addr(2)], false).unwrap();
        assert_eq!(classify_callee(&SymValue::concrete(addr(1).to_word()), &book), CalleeClass::Oracle);
        assert_eq!(classify_callee(&SymValue::concrete(addr(2).to_word()), &book), CalleeClass::Token);
        assert_eq!(classify_callee(&SymValue::concrete(addr(3).to_word()), &book), CalleeClass::Unknown);
        let sym = SymValue::symbol(0, SymbolOrigin::Caller, Taint::empty());
        assert_eq!(classify_callee(&sym, &book), CalleeClass::Unknown);
        let wild = AddressBook::new([addr(1)], [addr(2)], true).unwrap();
        assert_eq!(classify_callee(&sym, &wild), CalleeClass::Oracle);
        assert!(wild.is_source(CalleeClass::Unknown));
        assert!(!book.is_source(CalleeClass::Unknown));
        assert!(!wild.is_source(CalleeClass::Token));
    }

    #[test]
    fn overlap_rejected() {
        assert_eq!(AddressBook::new([addr(1)], [addr(1)], false), Err(BookError::Overlap(addr(1))));
    }
}
