//! Decoder and assembler properties.

use proptest::prelude::*;

use blockeye_core::evm::opcode::JUMPDEST;
use blockeye_core::evm::{assemble, disassemble, disassemble_prefix, Opcode};

fn instruction() -> impl Strategy<Value = Vec<u8>> {
    let ops: Vec<Opcode> = Opcode::all().collect();
    (proptest::sample::select(ops), proptest::collection::vec(any::<u8>(), 32)).prop_map(|(op, imm)| {
        let mut v = vec![op.code];
        v.extend_from_slice(&imm[..op.immediate_len as usize]);
        v
    })
}

fn valid_code() -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(instruction(), 0..40).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Rendering a program as text and assembling it gives back the same bytes.
    #[test]
    fn disassemble_assemble_round_trip(code in valid_code()) {
        let p = disassemble(&code).unwrap();
        let text: String = p.instructions().iter().map(|i| format!("{i}\n")).collect();
        prop_assert_eq!(assemble(&text).unwrap(), code);
    }

    /// Decoded instructions tile the bytes from offset 0 up to the first error.
    #[test]
    fn instructions_tile_the_code(code in proptest::collection::vec(any::<u8>(), 0..200)) {
        let (ins, err) = disassemble_prefix(&code);
        let mut at = 0;
        for i in &ins {
            prop_assert_eq!(i.offset, at);
            prop_assert_eq!(i.opcode.code, code[at]);
            at = i.next_offset();
        }
        match err {
            Some(e) => {
                prop_assert_eq!(e.offset(), at);
                prop_assert!(Opcode::from_byte(code[at]).is_none());
                prop_assert!(disassemble(&code).is_err());
            }
            // a truncated trailing PUSH may run past the end
            None => prop_assert!(at >= code.len()),
        }
    }

    /// Jump destinations are exactly the JUMPDEST bytes at instruction starts;
    /// a 0x5b inside PUSH data never counts.
    #[test]
    fn jumpdests_are_instruction_starts(code in valid_code()) {
        let p = disassemble(&code).unwrap();
        let starts: Vec<usize> = p.instructions().iter().map(|i| i.offset).collect();
        for (off, b) in code.iter().enumerate() {
            let expected = *b == JUMPDEST && starts.contains(&off);
            prop_assert_eq!(p.is_jumpdest(off), expected, "offset {}", off);
        }
    }
}

#[test]
fn push_data_hides_jumpdest() {
    // PUSH2 0x5b5b; JUMPDEST
    let p = disassemble(&[0x61, 0x5b, 0x5b, 0x5b]).unwrap();
    assert_eq!(p.jumpdests().iter().copied().collect::<Vec<_>>(), [3]);
}
