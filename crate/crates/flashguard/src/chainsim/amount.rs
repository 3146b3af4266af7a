//! Token amounts in integer base units.
//!
//! Amounts are arbitrary-precision non-negative integers so that any value a
//! 32-byte calldata word can carry round-trips losslessly. They serialize as
//! decimal strings.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative token amount in base units.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(BigUint);

impl Amount {
    pub fn zero() -> Self {
        Amount(BigUint::zero())
    }

    pub fn one() -> Self {
        Amount(BigUint::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Subtraction that fails instead of wrapping below zero.
    pub fn checked_sub(&self, rhs: &Amount) -> Option<Amount> {
        if self.0 >= rhs.0 {
            Some(Amount(&self.0 - &rhs.0))
        } else {
            None
        }
    }

    /// `ceil(self * num / den)`. Used for flash-loan fees. `den` must be nonzero.
    pub fn mul_ratio_ceil(&self, num: u64, den: u64) -> Amount {
        assert!(den != 0, "ratio denominator must be nonzero");
        let scaled = &self.0 * BigUint::from(num);
        let den = BigUint::from(den);
        Amount((scaled + &den - BigUint::one()) / den)
    }

    /// Encodes into a 32-byte big-endian word. Panics if the value needs more
    /// than 32 bytes, which scenario-generated amounts never do.
    pub fn to_word(&self) -> [u8; 32] {
        let bytes = self.0.to_bytes_be();
        assert!(bytes.len() <= 32, "amount exceeds 32-byte word");
        let mut word = [0u8; 32];
        word[32 - bytes.len()..].copy_from_slice(&bytes);
        word
    }

    pub fn from_word(word: &[u8; 32]) -> Amount {
        Amount(BigUint::from_bytes_be(word))
    }

    pub fn to_u64_saturating(&self) -> u64 {
        use num_traits::ToPrimitive;
        self.0.to_u64().unwrap_or(u64::MAX)
    }
}

impl From<u64> for Amount {
    fn from(v: u64) -> Self {
        Amount(BigUint::from(v))
    }
}

impl From<u128> for Amount {
    fn from(v: u128) -> Self {
        Amount(BigUint::from(v))
    }
}

impl Add<&Amount> for &Amount {
    type Output = Amount;
    fn add(self, rhs: &Amount) -> Amount {
        Amount(&self.0 + &rhs.0)
    }
}

impl AddAssign<&Amount> for Amount {
    fn add_assign(&mut self, rhs: &Amount) {
        self.0 += &rhs.0;
    }
}

impl Sub<&Amount> for &Amount {
    type Output = Amount;
    fn sub(self, rhs: &Amount) -> Amount {
        self.checked_sub(rhs).expect("amount underflow")
    }
}

impl SubAssign<&Amount> for Amount {
    fn sub_assign(&mut self, rhs: &Amount) {
        *self = (&*self).sub(rhs);
    }
}

impl<'a> Sum<&'a Amount> for Amount {
    fn sum<I: Iterator<Item = &'a Amount>>(iter: I) -> Amount {
        let mut acc = Amount::zero();
        for a in iter {
            acc += a;
        }
        acc
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        let mut acc = Amount::zero();
        for a in iter {
            acc += &a;
        }
        acc
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Amount {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BigUint::from_str(s)
            .map(Amount)
            .map_err(|e| format!("invalid amount {s:?}: {e}"))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_round_trip() {
        let a = Amount::from(1_300_000u64);
        assert_eq!(Amount::from_word(&a.to_word()), a);
    }

    #[test]
    fn checked_sub_underflow() {
        let a = Amount::from(5u64);
        assert_eq!(a.checked_sub(&Amount::from(6u64)), None);
        assert_eq!(a.checked_sub(&Amount::from(5u64)), Some(Amount::zero()));
    }

    #[test]
    fn fee_rounds_up() {
        // 1000 * 9 / 10000 = 0.9 -> ceil 1
        let fee = Amount::from(1000u64).mul_ratio_ceil(9, 10_000);
        assert_eq!(fee, Amount::from(1u64));
        // zero rate stays zero
        assert_eq!(
            Amount::from(1000u64).mul_ratio_ceil(0, 1),
            Amount::zero()
        );
    }

    #[test]
    fn decimal_string_serde() {
        let a = Amount::from(405_707_500u64);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "\"405707500\"");
        let back: Amount = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }
}
