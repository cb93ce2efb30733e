//! A small line-oriented assembler used to build bytecode fixtures.
//!
//! One instruction per line. `;` and `#` start comments. A line of the form
//! `name:` binds a label to the current offset (no bytes are emitted, so a
//! jump target still needs an explicit `JUMPDEST`). A PUSH immediate is a hex
//! (`0x..`) or decimal literal, or `@name` for a label offset.

use std::collections::HashMap;

use crate::U256;

use super::opcode::Opcode;
use super::AsmError;

enum Operand {
    Value(U256),
    Label(String),
}

struct Line {
    number: usize,
    opcode: Opcode,
    operand: Option<Operand>,
}

fn parse_literal(s: &str) -> Option<U256> {
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        if hex.is_empty() {
            return None;
        }
        U256::from_str_radix(hex, 16).ok()
    } else {
        U256::from_str_radix(s, 10).ok()
    }
}

fn fits(value: &U256, bytes: u8) -> bool {
    value.bit_len() <= bytes as usize * 8
}

/// Assembles mnemonic text into bytecode.
pub fn assemble(text: &str) -> Result<Vec<u8>, AsmError> {
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut lines = Vec::new();
    let mut offset = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let content = raw.split([';', '#']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_suffix(':') {
            let name = name.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(AsmError::Parse { line: number, reason: "bad label".into() });
            }
            if labels.insert(name.to_string(), offset).is_some() {
                return Err(AsmError::Parse { line: number, reason: format!("duplicate label {name}") });
            }
            continue;
        }
        let mut parts = content.split_whitespace();
        let mnemonic = parts.next().unwrap_or_default();
        let opcode = Opcode::from_mnemonic(mnemonic).ok_or_else(|| AsmError::Parse {
            line: number,
            reason: format!("unknown mnemonic {mnemonic}"),
        })?;
        let operand = parts.next();
        if parts.next().is_some() {
            return Err(AsmError::Parse { line: number, reason: "trailing tokens".into() });
        }
        let operand = match (opcode.is_push(), operand) {
            (false, None) => None,
            (false, Some(_)) => {
                return Err(AsmError::Parse {
                    line: number,
                    reason: format!("{} takes no operand", opcode.mnemonic),
                })
            }
            (true, None) => {
                return Err(AsmError::Parse { line: number, reason: "missing immediate".into() })
            }
            (true, Some(tok)) => Some(match tok.strip_prefix('@') {
                Some(label) => Operand::Label(label.to_string()),
                None => {
                    let v = parse_literal(tok).ok_or_else(|| AsmError::Parse {
                        line: number,
                        reason: format!("bad immediate {tok}"),
                    })?;
                    if !fits(&v, opcode.immediate_len) {
                        return Err(AsmError::Parse {
                            line: number,
                            reason: format!("immediate {tok} exceeds {} byte(s)", opcode.immediate_len),
                        });
                    }
                    Operand::Value(v)
                }
            }),
        };
        offset += 1 + opcode.immediate_len as usize;
        lines.push(Line { number, opcode, operand });
    }

    let mut out = Vec::with_capacity(offset);
    for line in lines {
        out.push(line.opcode.code);
        let value = match line.operand {
            None => continue,
            Some(Operand::Value(v)) => v,
            Some(Operand::Label(name)) => {
                let target = *labels.get(&name).ok_or_else(|| AsmError::Parse {
                    line: line.number,
                    reason: format!("undefined label {name}"),
                })?;
                let v = U256::from(target);
                if !fits(&v, line.opcode.immediate_len) {
                    return Err(AsmError::Parse {
                        line: line.number,
                        reason: format!("label {name} does not fit"),
                    });
                }
                v
            }
        };
        let n = line.opcode.immediate_len as usize;
        let bytes: [u8; 32] = value.to_be_bytes();
        out.extend_from_slice(&bytes[32 - n..]);
    }
    Ok(out)
}
