//! Decoding and encoding for the supported EVM opcode subset.

mod asm;
mod disasm;
pub mod opcode;

pub use asm::assemble;
pub use disasm::{decode_instruction, disassemble, disassemble_prefix, Instruction, Program};
pub use opcode::Opcode;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unknown opcode {byte:#04x} at offset {offset}")]
    UnknownOpcode { byte: u8, offset: usize },
    #[error("offset {offset} is past the end of code")]
    OutOfBounds { offset: usize },
}

impl DecodeError {
    pub fn offset(&self) -> usize {
        match self {
            DecodeError::UnknownOpcode { offset, .. } | DecodeError::OutOfBounds { offset } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HexError {
    #[error("invalid hex bytecode: {0}")]
    Invalid(String),
}

/// Parses bytecode hex text. An optional `0x` prefix is accepted and all
/// whitespace is ignored.
pub fn parse_hex(text: &str) -> Result<Vec<u8>, HexError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let body = compact
        .strip_prefix("0x")
        .or_else(|| compact.strip_prefix("0X"))
        .unwrap_or(&compact);
    hex::decode(body).map_err(|e| HexError::Invalid(e.to_string()))
}
