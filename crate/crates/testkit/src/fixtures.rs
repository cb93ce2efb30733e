//! Hand-built contract and transaction fixtures.

use std::path::PathBuf;

use blockeye_core::evm::assemble;
use blockeye_core::oracle::AddressBook;
use blockeye_core::Address;

pub const FIXTURES_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub const CURVE: &str = "0x45f783cce6b7ff23b2ab2d70e416cdb7d6055f51";
pub const DAI: &str = "0x6b175474e89094c44da98b954eedeac495271d0f";
pub const TKN: &str = "0x70ce000000000000000000000000000000000003";
pub const ATTACKER: &str = "0xa77ac0000000000000000000000000000000000a";

/// Contract fixtures without oracle-to-sink flows.
pub const NEGATIVE: &[&str] = &["f_pop", "f_indep", "no_call", "two_branch", "f_loop"];
/// Every contract fixture.
pub const CONTRACTS: &[&str] =
    &["f_emn", "f_pop", "f_indep", "f_store", "f_branch", "f_pay", "f_loop", "two_branch", "no_call"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(FIXTURES_DIR).join(name)
}

/// Assembles `fixtures/<name>.asm`.
pub fn fixture_code(name: &str) -> Vec<u8> {
    let path = fixture_path(&format!("{name}.asm"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assemble(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn addr(s: &str) -> Address {
    s.parse().expect("fixture address")
}

/// CURVE as the oracle, DAI and TKN as tokens.
pub fn book() -> AddressBook {
    AddressBook::new([addr(CURVE)], [addr(DAI), addr(TKN)], false).expect("disjoint")
}
