//! Call encoding: a selector, 32-byte argument words, and optional embedded
//! sub-calls for contracts that forward calls.
//!
//! Wire layout:
//!
//! ```text
//! [selector: 4][args: 32 x n]                                  -- flat call
//! [selector: 4][args: 32 x n][MARKER: 4][count: u16][blob ...] -- with sub-calls
//! blob = [len: u32][target: 20][encoded inner call]
//! ```
//!
//! The nested region is introduced by a reserved marker so that a decoder can
//! find the args/nested boundary without out-of-band schema. Well-formed
//! argument words (zero-padded addresses and amounts) can never begin with
//! the marker, and a candidate split is only accepted if the entire nested
//! region parses recursively, so flat and nested encodings do not collide.

use serde::{Deserialize, Serialize};

use crate::chainsim::Address;

use super::{CalldataError, Selector};

/// Reserved 4-byte marker that opens the nested-call region.
const NESTED_MARKER: [u8; 4] = [0xfe, 0xed, 0xf0, 0x0d];

/// An embedded sub-call: the address it is aimed at plus its own calldata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedCall {
    pub target: Address,
    pub call: CallData,
}

/// Decoded transaction input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallData {
    pub selector: Selector,
    pub args: Vec<[u8; 32]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nested: Vec<NestedCall>,
}

impl CallData {
    pub fn flat(selector: Selector, args: Vec<[u8; 32]>) -> CallData {
        CallData {
            selector,
            args,
            nested: Vec::new(),
        }
    }

    pub fn with_nested(
        selector: Selector,
        args: Vec<[u8; 32]>,
        nested: Vec<NestedCall>,
    ) -> CallData {
        CallData {
            selector,
            args,
            nested,
        }
    }

    pub fn arg_address(&self, index: usize) -> Option<Address> {
        self.args.get(index).map(Address::from_word)
    }

    pub fn arg_amount(&self, index: usize) -> Option<crate::chainsim::Amount> {
        self.args.get(index).map(crate::chainsim::Amount::from_word)
    }

    pub fn encoded_len(&self) -> usize {
        4 + 32 * self.args.len() + self.nested_section_len()
    }

    fn nested_section_len(&self) -> usize {
        if self.nested.is_empty() {
            0
        } else {
            4 + 2
                + self
                    .nested
                    .iter()
                    .map(|n| 4 + 20 + n.call.encoded_len())
                    .sum::<usize>()
        }
    }
}

/// Encodes a flat call (no embedded sub-calls).
pub fn encode_call(selector: Selector, args: &[[u8; 32]]) -> Vec<u8> {
    encode(&CallData::flat(selector, args.to_vec()))
}

/// Encodes a full call tree.
pub fn encode(call: &CallData) -> Vec<u8> {
    let mut out = Vec::with_capacity(call.encoded_len());
    out.extend_from_slice(&call.selector.0);
    for word in &call.args {
        out.extend_from_slice(word);
    }
    if !call.nested.is_empty() {
        out.extend_from_slice(&NESTED_MARKER);
        out.extend_from_slice(&(call.nested.len() as u16).to_be_bytes());
        for nested in &call.nested {
            let inner = encode(&nested.call);
            out.extend_from_slice(&((20 + inner.len()) as u32).to_be_bytes());
            out.extend_from_slice(&nested.target.0);
            out.extend_from_slice(&inner);
        }
    }
    debug_assert_eq!(out.len(), call.encoded_len());
    out
}

/// Decodes bytes produced by [`encode`]. Inputs shorter than a selector are
/// `TruncatedInput`; anything that fits neither the flat nor the nested
/// layout is `LengthMismatch`.
pub fn decode(bytes: &[u8]) -> Result<CallData, CalldataError> {
    if bytes.len() < 4 {
        return Err(CalldataError::TruncatedInput {
            got: bytes.len(),
            need: 4,
        });
    }
    let selector = Selector([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let rest = &bytes[4..];

    // Look for a marker at a word boundary whose remainder parses completely.
    let mut offset = 0;
    while offset + 4 <= rest.len() {
        if rest[offset..offset + 4] == NESTED_MARKER && offset % 32 == 0 {
            if let Some(nested) = parse_nested_section(&rest[offset + 4..]) {
                let args = split_words(&rest[..offset]);
                return Ok(CallData {
                    selector,
                    args,
                    nested,
                });
            }
        }
        offset += 32;
    }

    if rest.len() % 32 != 0 {
        return Err(CalldataError::LengthMismatch {
            got: bytes.len(),
        });
    }
    Ok(CallData::flat(selector, split_words(rest)))
}

fn split_words(bytes: &[u8]) -> Vec<[u8; 32]> {
    bytes
        .chunks_exact(32)
        .map(|chunk| {
            let mut word = [0u8; 32];
            word.copy_from_slice(chunk);
            word
        })
        .collect()
}

/// Parses `[count: u16][blob ...]`, returning `None` unless the section is
/// structurally valid and consumes the input exactly.
fn parse_nested_section(bytes: &[u8]) -> Option<Vec<NestedCall>> {
    if bytes.len() < 2 {
        return None;
    }
    let count = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
    let mut cursor = &bytes[2..];
    let mut nested = Vec::with_capacity(count);
    for _ in 0..count {
        if cursor.len() < 4 {
            return None;
        }
        let len = u32::from_be_bytes([cursor[0], cursor[1], cursor[2], cursor[3]]) as usize;
        cursor = &cursor[4..];
        if len < 20 || cursor.len() < len {
            return None;
        }
        let mut target = [0u8; 20];
        target.copy_from_slice(&cursor[..20]);
        let call = decode(&cursor[20..len]).ok()?;
        // Inner encodings must be canonical or the split is rejected.
        if call.encoded_len() != len - 20 {
            return None;
        }
        nested.push(NestedCall {
            target: Address(target),
            call,
        });
        cursor = &cursor[len..];
    }
    if cursor.is_empty() && !nested.is_empty() {
        Some(nested)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calldata::compute_selector;

    fn transfer_sel() -> Selector {
        compute_selector("transfer(address,uint256)").unwrap()
    }

    #[test]
    fn flat_encoding_length_is_4_plus_32_per_word() {
        let addr = Address::derived(1, 1).to_word();
        let amount = crate::chainsim::Amount::from(10u64).to_word();
        let encoded = encode_call(transfer_sel(), &[addr, amount]);
        assert_eq!(encoded.len(), 68);
    }

    #[test]
    fn truncated_input_is_reported() {
        match decode(&[0xa9, 0x05, 0x9c]) {
            Err(CalldataError::TruncatedInput { got: 3, .. }) => {}
            other => panic!("expected TruncatedInput, got {other:?}"),
        }
    }

    #[test]
    fn ragged_length_is_reported() {
        let mut encoded = encode_call(transfer_sel(), &[[0u8; 32]]);
        encoded.push(0xff);
        assert!(matches!(
            decode(&encoded),
            Err(CalldataError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn nested_round_trip() {
        let inner = CallData::flat(transfer_sel(), vec![Address::BURN.to_word()]);
        let outer = CallData::with_nested(
            compute_selector("execute()").unwrap(),
            vec![[7u8; 32]; 2],
            vec![
                NestedCall {
                    target: Address::derived(2, 1),
                    call: inner.clone(),
                },
                NestedCall {
                    target: Address::derived(2, 2),
                    call: CallData::with_nested(
                        compute_selector("forward(address)").unwrap(),
                        vec![],
                        vec![NestedCall {
                            target: Address::derived(2, 3),
                            call: inner,
                        }],
                    ),
                },
            ],
        );
        let encoded = encode(&outer);
        assert_eq!(encoded.len(), outer.encoded_len());
        assert_eq!(decode(&encoded).unwrap(), outer);
    }

    #[test]
    fn empty_args_round_trip() {
        let call = CallData::flat(compute_selector("poke()").unwrap(), vec![]);
        assert_eq!(decode(&encode(&call)).unwrap(), call);
        assert_eq!(encode(&call).len(), 4);
    }
}
