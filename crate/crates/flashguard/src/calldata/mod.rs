//! Canonical function-selector derivation, call encoding/decoding,
//! embedded-selector scanning of nested input data, and the signature
//! database.

mod database;
mod encoding;
mod selector;

pub use database::{SignatureClass, SignatureDatabase, SignatureEntry};
pub use encoding::{decode, encode, encode_call, CallData, NestedCall};
pub use selector::{compute_selector, keccak256, Selector};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::chainsim::{ChainError, ExecOptions, Transaction, WorldState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalldataError {
    #[error("malformed signature {0:?}: expected name(type,...) with no spaces")]
    MalformedSignature(String),
    #[error("malformed selector {0:?}: expected 8 hex chars")]
    MalformedSelector(String),
    #[error("truncated input: got {got} bytes, need at least {need}")]
    TruncatedInput { got: usize, need: usize },
    #[error("input length {got} fits neither flat nor nested layout")]
    LengthMismatch { got: usize },
    #[error("unknown signature class {0:?}")]
    UnknownClass(String),
    #[error("selector {selector} already registered in class {existing_class}")]
    DuplicateSelector {
        selector: Selector,
        existing_class: &'static str,
    },
    #[error("signature database line {line}: {reason}")]
    MalformedDatabaseLine { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Returns every database-known selector appearing at the head of the input
/// or at the head of any embedded sub-call, to any depth. Garbage input that
/// fails to decode yields the head selector alone (when known) or nothing.
pub fn scan_embedded_selectors(input: &[u8], db: &SignatureDatabase) -> BTreeSet<Selector> {
    let mut found = BTreeSet::new();
    match decode(input) {
        Ok(call) => collect_known(&call, db, &mut found),
        Err(_) => {
            if input.len() >= 4 {
                let head = Selector([input[0], input[1], input[2], input[3]]);
                if db.contains(&head) {
                    found.insert(head);
                }
            }
        }
    }
    found
}

/// Same scan over an already-decoded call tree.
pub fn scan_call(call: &CallData, db: &SignatureDatabase) -> BTreeSet<Selector> {
    let mut found = BTreeSet::new();
    collect_known(call, db, &mut found);
    found
}

fn collect_known(call: &CallData, db: &SignatureDatabase, found: &mut BTreeSet<Selector>) {
    if db.contains(&call.selector) {
        found.insert(call.selector);
    }
    for nested in &call.nested {
        collect_known(&nested.call, db, found);
    }
}

/// Ground-truth selector oracle: speculatively executes the transaction on a
/// snapshot (discarding all state changes) and returns the selectors of every
/// call in the trace, including the top-level call and calls attempted before
/// a revert.
pub fn trace_selectors(
    world: &WorldState,
    tx: &Transaction,
) -> Result<BTreeSet<Selector>, ChainError> {
    let mut scratch = world.clone();
    let trace = crate::chainsim::apply_transaction_with(&mut scratch, tx, &ExecOptions::default())?;
    Ok(trace
        .internal_calls
        .iter()
        .map(|call| call.selector)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chainsim::{Address, Amount};

    fn db() -> SignatureDatabase {
        SignatureDatabase::builtin()
    }

    fn sel(hex: &str) -> Selector {
        hex.parse().unwrap()
    }

    #[test]
    fn plain_transfer_scan() {
        let call = CallData::flat(
            sel("a9059cbb"),
            vec![Address::derived(1, 1).to_word(), Amount::from(10u64).to_word()],
        );
        let found = scan_embedded_selectors(&encode(&call), &db());
        assert_eq!(found, [sel("a9059cbb")].into_iter().collect());
    }

    #[test]
    fn attack_shape_scan_returns_all_classes() {
        let token = Address::derived(9, 1);
        let attack = CallData::with_nested(
            compute_selector("runExploit()").unwrap(),
            vec![],
            vec![
                NestedCall {
                    target: Address::derived(9, 2),
                    call: CallData::with_nested(
                        sel("1b8b5af1"),
                        vec![token.to_word(), Amount::from(1_300_000u64).to_word()],
                        vec![NestedCall {
                            target: token,
                            call: CallData::flat(
                                sel("095ea7b3"),
                                vec![Address::derived(9, 3).to_word(), Amount::one().to_word()],
                            ),
                        }],
                    ),
                },
                NestedCall {
                    target: token,
                    call: CallData::flat(
                        sel("a9059cbb"),
                        vec![Address::derived(9, 4).to_word(), Amount::one().to_word()],
                    ),
                },
            ],
        );
        let found = scan_embedded_selectors(&encode(&attack), &db());
        assert_eq!(
            found,
            [sel("1b8b5af1"), sel("095ea7b3"), sel("a9059cbb")]
                .into_iter()
                .collect()
        );
    }

    #[test]
    fn mid_word_bytes_do_not_match() {
        // Embed the transfer selector inside an argument word of an unknown
        // call: it is not at a blob head and must not be reported.
        let mut word = [0u8; 32];
        word[10..14].copy_from_slice(&[0xa9, 0x05, 0x9c, 0xbb]);
        let call = CallData::flat(compute_selector("unknownFn(uint256)").unwrap(), vec![word]);
        assert!(scan_embedded_selectors(&encode(&call), &db()).is_empty());
    }

    #[test]
    fn garbage_yields_empty_set() {
        assert!(scan_embedded_selectors(&[0x01, 0x02], &db()).is_empty());
        let garbage = vec![0xccu8; 37];
        assert!(scan_embedded_selectors(&garbage, &db()).is_empty());
    }
}
