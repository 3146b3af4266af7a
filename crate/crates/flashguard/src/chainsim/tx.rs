//! Transactions and execution traces.

use serde::{Deserialize, Serialize};

use crate::calldata::{self, CallData, Selector};

use super::{Address, Amount, TxHash};

/// A signed pending call. The hash is derived from the identifying fields,
/// so it is unique per `(from, nonce)` and stable across serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub hash: TxHash,
    pub nonce: u64,
    pub from: Address,
    pub to: Address,
    /// Price per gas unit, in gwei.
    pub gas_price: u64,
    pub gas_limit: u64,
    /// Native value carried by the call.
    pub value: Amount,
    /// Decoded input; `None` for a plain native transfer.
    pub input: Option<CallData>,
}

impl Transaction {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nonce: u64,
        from: Address,
        to: Address,
        gas_price: u64,
        gas_limit: u64,
        value: Amount,
        input: Option<CallData>,
    ) -> Transaction {
        let mut tx = Transaction {
            hash: TxHash::default(),
            nonce,
            from,
            to,
            gas_price,
            gas_limit,
            value,
            input,
        };
        tx.hash = tx.derive_hash();
        tx
    }

    pub fn encoded_input(&self) -> Vec<u8> {
        self.input
            .as_ref()
            .map(calldata::encode)
            .unwrap_or_default()
    }

    fn derive_hash(&self) -> TxHash {
        let mut preimage = Vec::new();
        preimage.extend_from_slice(&self.from.0);
        preimage.extend_from_slice(&self.nonce.to_be_bytes());
        preimage.extend_from_slice(&self.to.0);
        preimage.extend_from_slice(&self.gas_price.to_be_bytes());
        preimage.extend_from_slice(&self.gas_limit.to_be_bytes());
        preimage.extend_from_slice(&self.value.to_word());
        preimage.extend_from_slice(&self.encoded_input());
        TxHash(calldata::keccak256(&preimage))
    }
}

/// Wire form: input as a hex string of the encoded calldata, hash omitted
/// and re-derived on load.
#[derive(Serialize, Deserialize)]
struct TransactionWire {
    nonce: u64,
    from: Address,
    to: Address,
    gas_price: u64,
    gas_limit: u64,
    value: Amount,
    input: String,
}

impl Serialize for Transaction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let input = {
            let bytes = self.encoded_input();
            let mut s = String::with_capacity(2 + bytes.len() * 2);
            s.push_str("0x");
            for b in &bytes {
                s.push_str(&format!("{b:02x}"));
            }
            s
        };
        TransactionWire {
            nonce: self.nonce,
            from: self.from,
            to: self.to,
            gas_price: self.gas_price,
            gas_limit: self.gas_limit,
            value: self.value.clone(),
            input,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Transaction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = TransactionWire::deserialize(deserializer)?;
        let hex = wire.input.strip_prefix("0x").unwrap_or(&wire.input);
        let input = if hex.is_empty() {
            None
        } else {
            if hex.len() % 2 != 0 {
                return Err(serde::de::Error::custom("odd-length input hex"));
            }
            let mut bytes = Vec::with_capacity(hex.len() / 2);
            for chunk in hex.as_bytes().chunks(2) {
                let hi = (chunk[0] as char)
                    .to_digit(16)
                    .ok_or_else(|| serde::de::Error::custom("bad input hex"))?;
                let lo = (chunk[1] as char)
                    .to_digit(16)
                    .ok_or_else(|| serde::de::Error::custom("bad input hex"))?;
                bytes.push((hi * 16 + lo) as u8);
            }
            Some(calldata::decode(&bytes).map_err(serde::de::Error::custom)?)
        };
        Ok(Transaction::new(
            wire.nonce,
            wire.from,
            wire.to,
            wire.gas_price,
            wire.gas_limit,
            wire.value,
            input,
        ))
    }
}

/// Outcome of executing a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TxStatus {
    Success,
    Reverted(String),
    OutOfGas,
}

impl TxStatus {
    pub fn is_success(&self) -> bool {
        matches!(self, TxStatus::Success)
    }
}

/// One call recorded during execution. The top-level call appears at depth 0
/// when the recipient carries code; calls into plain accounts record nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InternalCall {
    pub caller: Address,
    pub callee: Address,
    pub selector: Selector,
    #[serde(skip)]
    pub args: Vec<[u8; 32]>,
    pub depth: u16,
}

/// One token movement recorded during execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MoneyFlow {
    pub token: Address,
    pub from: Address,
    pub to: Address,
    pub amount: Amount,
}

/// One allowance grant recorded during execution (a data dependency the
/// attack relies on).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApprovalEvent {
    pub token: Address,
    pub owner: Address,
    pub spender: Address,
    pub amount: Amount,
}

/// The ordered record of a transaction's execution. On a non-Success status
/// the world is rolled back but the trace still lists everything attempted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionTrace {
    pub tx_hash: TxHash,
    pub internal_calls: Vec<InternalCall>,
    pub status: TxStatus,
    pub gas_used: u64,
    pub money_flows: Vec<MoneyFlow>,
    pub approvals: Vec<ApprovalEvent>,
    /// Number of injectable fault points encountered (scripted steps and
    /// built-in operations), for exhaustive failure sweeps.
    pub fault_points: u64,
    /// Cumulative gas after each charge; populated only when requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub charge_log: Vec<u64>,
}

impl ExecutionTrace {
    /// Selectors of every call in the trace, including the top-level call.
    pub fn selectors(&self) -> std::collections::BTreeSet<Selector> {
        self.internal_calls.iter().map(|c| c.selector).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calldata::{compute_selector, encode};

    #[test]
    fn hash_unique_per_from_nonce() {
        let from = Address::derived(1, 1);
        let to = Address::derived(1, 2);
        let a = Transaction::new(0, from, to, 5, 100_000, Amount::zero(), None);
        let b = Transaction::new(1, from, to, 5, 100_000, Amount::zero(), None);
        assert_ne!(a.hash, b.hash);
        let a_again = Transaction::new(0, from, to, 5, 100_000, Amount::zero(), None);
        assert_eq!(a.hash, a_again.hash);
    }

    #[test]
    fn serde_round_trip_preserves_hash() {
        let input = CallData::flat(
            compute_selector("transfer(address,uint256)").unwrap(),
            vec![Address::derived(2, 2).to_word(), Amount::from(10u64).to_word()],
        );
        let tx = Transaction::new(
            3,
            Address::derived(1, 1),
            Address::derived(2, 1),
            7,
            90_000,
            Amount::zero(),
            Some(input.clone()),
        );
        let json = serde_json::to_string(&tx).unwrap();
        assert!(json.contains(&format!(
            "0x{}",
            encode(&input)
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect::<String>()
        )));
        let back: Transaction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tx);
        assert_eq!(back.hash, tx.hash);
    }
}
