//! 20-byte account identifiers and 32-byte transaction hashes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A 20-byte opaque account identifier. Equality is byte-exact; whether an
/// address is an EOA or a contract is resolved against the world state (see
/// `WorldState::kind_of`), not stored in the value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

/// Account kind, resolved from world state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddressKind {
    Eoa,
    Contract,
}

impl Address {
    /// The reserved zero address.
    pub const ZERO: Address = Address([0u8; 20]);

    /// The reserved burn address `0x…dead`.
    pub const BURN: Address = Address([
        0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
        0x00, 0x00, 0x00, 0xde, 0xad,
    ]);

    /// Deterministic address derivation for scenario construction: a tagged
    /// index packed into the low bytes so generated addresses never collide.
    pub fn derived(tag: u8, index: u64) -> Address {
        let mut bytes = [0u8; 20];
        bytes[0] = tag;
        bytes[12..].copy_from_slice(&index.to_be_bytes());
        Address(bytes)
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(42);
        s.push_str("0x");
        for b in &self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn to_word(&self) -> [u8; 32] {
        let mut word = [0u8; 32];
        word[12..].copy_from_slice(&self.0);
        word
    }

    pub fn from_word(word: &[u8; 32]) -> Address {
        let mut bytes = [0u8; 20];
        bytes.copy_from_slice(&word[12..]);
        Address(bytes)
    }
}

fn decode_hex_fixed<const N: usize>(s: &str) -> Result<[u8; N], String> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    if s.len() != 2 * N {
        return Err(format!("expected {} hex chars, got {}", 2 * N, s.len()));
    }
    let mut out = [0u8; N];
    for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
        let hi = (chunk[0] as char).to_digit(16).ok_or("bad hex digit")?;
        let lo = (chunk[1] as char).to_digit(16).ok_or("bad hex digit")?;
        out[i] = (hi * 16 + lo) as u8;
    }
    Ok(out)
}

impl FromStr for Address {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_hex_fixed::<20>(s).map(Address)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A 32-byte transaction identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TxHash(pub [u8; 32]);

impl TxHash {
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(66);
        s.push_str("0x");
        for b in &self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

impl FromStr for TxHash {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_hex_fixed::<32>(s).map(TxHash)
    }
}

impl fmt::Debug for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl Serialize for TxHash {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for TxHash {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burn_address_hex() {
        assert_eq!(
            Address::BURN.to_hex(),
            "0x000000000000000000000000000000000000dead"
        );
    }

    #[test]
    fn hex_round_trip() {
        let a = Address::derived(7, 42);
        let parsed: Address = a.to_hex().parse().unwrap();
        assert_eq!(parsed, a);
    }

    #[test]
    fn word_round_trip() {
        let a = Address::derived(3, 9);
        assert_eq!(Address::from_word(&a.to_word()), a);
    }

    #[test]
    fn rejects_short_hex() {
        assert!("0x1234".parse::<Address>().is_err());
    }
}
