use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::U256;

use super::opcode::{Opcode, JUMPDEST};
use super::DecodeError;

/// One decoded instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: Opcode,
    /// Zero-extended PUSH immediate; `None` for every other opcode.
    pub immediate: Option<U256>,
}

impl Instruction {
    /// Byte length in code, opcode byte included.
    pub fn size(&self) -> usize {
        1 + self.opcode.immediate_len as usize
    }

    pub fn next_offset(&self) -> usize {
        self.offset + self.size()
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.immediate {
            Some(imm) => write!(f, "{} {:#x}", self.opcode, imm),
            None => write!(f, "{}", self.opcode),
        }
    }
}

/// Decoded bytecode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    code: Vec<u8>,
    instructions: Vec<Instruction>,
    jumpdests: BTreeSet<usize>,
    by_offset: BTreeMap<usize, usize>,
}

impl Program {
    pub fn code(&self) -> &[u8] {
        &self.code
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn jumpdests(&self) -> &BTreeSet<usize> {
        &self.jumpdests
    }

    pub fn is_jumpdest(&self, offset: usize) -> bool {
        self.jumpdests.contains(&offset)
    }

    /// Instruction starting exactly at `offset`.
    pub fn at(&self, offset: usize) -> Option<&Instruction> {
        self.by_offset.get(&offset).map(|&i| &self.instructions[i])
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }
}

/// Decodes the instruction that starts at `offset`.
///
/// A PUSH whose immediate runs past the end of `code` is zero-padded on the right.
pub fn decode_instruction(code: &[u8], offset: usize) -> Result<Instruction, DecodeError> {
    let byte = *code.get(offset).ok_or(DecodeError::OutOfBounds { offset })?;
    let opcode = Opcode::from_byte(byte).ok_or(DecodeError::UnknownOpcode { byte, offset })?;
    let immediate = if opcode.is_push() {
        let n = opcode.immediate_len as usize;
        let mut buf = [0u8; 32];
        let start = offset + 1;
        let end = (start + n).min(code.len());
        let avail = end.saturating_sub(start);
        // big-endian value of the n immediate bytes, right-padded with zeros
        buf[32 - n..32 - n + avail].copy_from_slice(&code[start..end]);
        Some(U256::from_be_bytes(buf))
    } else {
        None
    };
    Ok(Instruction { offset, opcode, immediate })
}

/// Disassembles the longest decodable prefix of `code`.
///
/// Returns the decoded instructions and the error that stopped decoding, if any.
pub fn disassemble_prefix(code: &[u8]) -> (Vec<Instruction>, Option<DecodeError>) {
    let mut out = Vec::new();
    let mut offset = 0;
    while offset < code.len() {
        match decode_instruction(code, offset) {
            Ok(ins) => {
                offset = ins.next_offset();
                out.push(ins);
            }
            Err(e) => return (out, Some(e)),
        }
    }
    (out, None)
}

/// Disassembles `code` into a [`Program`].
pub fn disassemble(code: &[u8]) -> Result<Program, DecodeError> {
    let (instructions, err) = disassemble_prefix(code);
    if let Some(e) = err {
        return Err(e);
    }
    let mut jumpdests = BTreeSet::new();
    let mut by_offset = BTreeMap::new();
    for (i, ins) in instructions.iter().enumerate() {
        if ins.opcode.code == JUMPDEST {
            jumpdests.insert(ins.offset);
        }
        by_offset.insert(ins.offset, i);
    }
    Ok(Program { code: code.to_vec(), instructions, jumpdests, by_offset })
}
