use std::fmt;

/// Static description of one supported opcode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Opcode {
    pub mnemonic: &'static str,
    pub code: u8,
    /// Stack items consumed.
    pub pops: u8,
    /// Stack items produced.
    pub pushes: u8,
    /// Inline immediate bytes following the opcode byte (PUSH1..PUSH32 only).
    pub immediate_len: u8,
}

pub const STOP: u8 = 0x00;
pub const ADD: u8 = 0x01;
pub const MUL: u8 = 0x02;
pub const SUB: u8 = 0x03;
pub const DIV: u8 = 0x04;
pub const MOD: u8 = 0x06;
pub const EXP: u8 = 0x0a;
pub const LT: u8 = 0x10;
pub const GT: u8 = 0x11;
pub const EQ: u8 = 0x14;
pub const ISZERO: u8 = 0x15;
pub const AND: u8 = 0x16;
pub const OR: u8 = 0x17;
pub const XOR: u8 = 0x18;
pub const NOT: u8 = 0x19;
pub const SHL: u8 = 0x1b;
pub const SHR: u8 = 0x1c;
pub const SHA3: u8 = 0x20;
pub const ADDRESS: u8 = 0x30;
pub const BALANCE: u8 = 0x31;
pub const CALLER: u8 = 0x33;
pub const CALLVALUE: u8 = 0x34;
pub const CALLDATALOAD: u8 = 0x35;
pub const CALLDATASIZE: u8 = 0x36;
pub const RETURNDATASIZE: u8 = 0x3d;
pub const RETURNDATACOPY: u8 = 0x3e;
pub const POP: u8 = 0x50;
pub const MLOAD: u8 = 0x51;
pub const MSTORE: u8 = 0x52;
pub const SLOAD: u8 = 0x54;
pub const SSTORE: u8 = 0x55;
pub const JUMP: u8 = 0x56;
pub const JUMPI: u8 = 0x57;
pub const PC: u8 = 0x58;
pub const JUMPDEST: u8 = 0x5b;
pub const PUSH1: u8 = 0x60;
pub const PUSH32: u8 = 0x7f;
pub const DUP1: u8 = 0x80;
pub const DUP16: u8 = 0x8f;
pub const SWAP1: u8 = 0x90;
pub const SWAP16: u8 = 0x9f;
pub const LOG0: u8 = 0xa0;
pub const LOG4: u8 = 0xa4;
pub const CALL: u8 = 0xf1;
pub const RETURN: u8 = 0xf3;
pub const DELEGATECALL: u8 = 0xf4;
pub const STATICCALL: u8 = 0xfa;
pub const REVERT: u8 = 0xfd;

const PUSH_NAMES: [&str; 32] = [
    "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9", "PUSH10",
    "PUSH11", "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19",
    "PUSH20", "PUSH21", "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28",
    "PUSH29", "PUSH30", "PUSH31", "PUSH32",
];
const DUP_NAMES: [&str; 16] = [
    "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9", "DUP10", "DUP11",
    "DUP12", "DUP13", "DUP14", "DUP15", "DUP16",
];
const SWAP_NAMES: [&str; 16] = [
    "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8", "SWAP9", "SWAP10",
    "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15", "SWAP16",
];
const LOG_NAMES: [&str; 5] = ["LOG0", "LOG1", "LOG2", "LOG3", "LOG4"];

const fn op(mnemonic: &'static str, code: u8, pops: u8, pushes: u8) -> Opcode {
    Opcode { mnemonic, code, pops, pushes, immediate_len: 0 }
}

const fn build_table() -> [Option<Opcode>; 256] {
    let mut t: [Option<Opcode>; 256] = [None; 256];
    t[STOP as usize] = Some(op("STOP", STOP, 0, 0));
    t[ADD as usize] = Some(op("ADD", ADD, 2, 1));
    t[MUL as usize] = Some(op("MUL", MUL, 2, 1));
    t[SUB as usize] = Some(op("SUB", SUB, 2, 1));
    t[DIV as usize] = Some(op("DIV", DIV, 2, 1));
    t[MOD as usize] = Some(op("MOD", MOD, 2, 1));
    t[EXP as usize] = Some(op("EXP", EXP, 2, 1));
    t[LT as usize] = Some(op("LT", LT, 2, 1));
    t[GT as usize] = Some(op("GT", GT, 2, 1));
    t[EQ as usize] = Some(op("EQ", EQ, 2, 1));
    t[ISZERO as usize] = Some(op("ISZERO", ISZERO, 1, 1));
    t[AND as usize] = Some(op("AND", AND, 2, 1));
    t[OR as usize] = Some(op("OR", OR, 2, 1));
    t[XOR as usize] = Some(op("XOR", XOR, 2, 1));
    t[NOT as usize] = Some(op("NOT", NOT, 1, 1));
    t[SHL as usize] = Some(op("SHL", SHL, 2, 1));
    t[SHR as usize] = Some(op("SHR", SHR, 2, 1));
    t[SHA3 as usize] = Some(op("SHA3", SHA3, 2, 1));
    t[ADDRESS as usize] = Some(op("ADDRESS", ADDRESS, 0, 1));
    t[BALANCE as usize] = Some(op("BALANCE", BALANCE, 1, 1));
    t[CALLER as usize] = Some(op("CALLER", CALLER, 0, 1));
    t[CALLVALUE as usize] = Some(op("CALLVALUE", CALLVALUE, 0, 1));
    t[CALLDATALOAD as usize] = Some(op("CALLDATALOAD", CALLDATALOAD, 1, 1));
    t[CALLDATASIZE as usize] = Some(op("CALLDATASIZE", CALLDATASIZE, 0, 1));
    t[RETURNDATASIZE as usize] = Some(op("RETURNDATASIZE", RETURNDATASIZE, 0, 1));
    t[RETURNDATACOPY as usize] = Some(op("RETURNDATACOPY", RETURNDATACOPY, 3, 0));
    t[POP as usize] = Some(op("POP", POP, 1, 0));
    t[MLOAD as usize] = Some(op("MLOAD", MLOAD, 1, 1));
    t[MSTORE as usize] = Some(op("MSTORE", MSTORE, 2, 0));
    t[SLOAD as usize] = Some(op("SLOAD", SLOAD, 1, 1));
    t[SSTORE as usize] = Some(op("SSTORE", SSTORE, 2, 0));
    t[JUMP as usize] = Some(op("JUMP", JUMP, 1, 0));
    t[JUMPI as usize] = Some(op("JUMPI", JUMPI, 2, 0));
    t[PC as usize] = Some(op("PC", PC, 0, 1));
    t[JUMPDEST as usize] = Some(op("JUMPDEST", JUMPDEST, 0, 0));
    let mut i = 0;
    while i < 32 {
        let code = PUSH1 + i as u8;
        t[code as usize] = Some(Opcode {
            mnemonic: PUSH_NAMES[i],
            code,
            pops: 0,
            pushes: 1,
            immediate_len: i as u8 + 1,
        });
        i += 1;
    }
    i = 0;
    while i < 16 {
        let n = i as u8 + 1;
        t[(DUP1 + i as u8) as usize] = Some(op(DUP_NAMES[i], DUP1 + i as u8, n, n + 1));
        t[(SWAP1 + i as u8) as usize] = Some(op(SWAP_NAMES[i], SWAP1 + i as u8, n + 1, n + 1));
        i += 1;
    }
    i = 0;
    while i < 5 {
        t[(LOG0 + i as u8) as usize] = Some(op(LOG_NAMES[i], LOG0 + i as u8, i as u8 + 2, 0));
        i += 1;
    }
    t[CALL as usize] = Some(op("CALL", CALL, 7, 1));
    t[RETURN as usize] = Some(op("RETURN", RETURN, 2, 0));
    t[DELEGATECALL as usize] = Some(op("DELEGATECALL", DELEGATECALL, 6, 1));
    t[STATICCALL as usize] = Some(op("STATICCALL", STATICCALL, 6, 1));
    t[REVERT as usize] = Some(op("REVERT", REVERT, 2, 0));
    t
}

static TABLE: [Option<Opcode>; 256] = build_table();

impl Opcode {
    /// Looks up a byte in the supported table.
    pub fn from_byte(byte: u8) -> Option<Opcode> {
        TABLE[byte as usize]
    }

    /// Looks up a mnemonic (case-insensitive). `SHA3` is also accepted as `KECCAK256`.
    pub fn from_mnemonic(name: &str) -> Option<Opcode> {
        let upper = name.to_ascii_uppercase();
        let upper = if upper == "KECCAK256" { "SHA3".to_string() } else { upper };
        TABLE.iter().flatten().find(|op| op.mnemonic == upper).copied()
    }

    /// Every supported opcode in byte order.
    pub fn all() -> impl Iterator<Item = Opcode> {
        TABLE.iter().flatten().copied()
    }

    pub fn is_push(&self) -> bool {
        self.immediate_len > 0
    }

    pub fn is_call(&self) -> bool {
        matches!(self.code, CALL | STATICCALL | DELEGATECALL)
    }

    /// Ends execution of the current frame.
    pub fn is_terminator(&self) -> bool {
        matches!(self.code, STOP | RETURN | REVERT)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic)
    }
}
