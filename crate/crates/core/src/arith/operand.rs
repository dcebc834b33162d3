use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A non-negative integer together with its decimal digits (most
/// significant first).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Operand {
    value: BigUint,
    digits: Vec<u8>,
}

impl Operand {
    pub fn new(value: BigUint) -> Self {
        let digits = value.to_str_radix(10).bytes().map(|b| b - b'0').collect();
        Self { value, digits }
    }

    /// Build from most-significant-first digits. Leading zeros are rejected
    /// unless the operand is the single digit 0.
    pub fn from_digits(digits: &[u8]) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::invalid("operand needs at least one digit"));
        }
        if digits.iter().any(|&d| d > 9) {
            return Err(Error::invalid("operand digit out of range"));
        }
        if digits.len() > 1 && digits[0] == 0 {
            return Err(Error::invalid("operand has a leading zero"));
        }
        let value = BigUint::from_radix_be(digits, 10).expect("digits are radix-10");
        Ok(Self { value, digits: digits.to_vec() })
    }

    pub fn from_u64(v: u64) -> Self {
        Self::new(BigUint::from(v))
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn n_digits(&self) -> usize {
        self.digits.len()
    }

    pub fn n_nonzero(&self) -> usize {
        self.digits.iter().filter(|&&d| d != 0).count()
    }

    pub fn trailing_zeros(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.digits.iter().rev().take_while(|&&d| d == 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.digits == [0]
    }

    /// `1`, `10`, `100`, ...
    pub fn is_power_of_ten(&self) -> bool {
        self.digits[0] == 1 && self.digits[1..].iter().all(|&d| d == 0)
    }

    /// Value as `u128` when it fits.
    pub fn to_u128(&self) -> Option<u128> {
        let digits = self.value.to_u64_digits();
        match digits.len() {
            0 => Some(0),
            1 => Some(digits[0] as u128),
            2 => Some(digits[0] as u128 | ((digits[1] as u128) << 64)),
            _ => None,
        }
    }

    pub fn to_i128(&self) -> Option<i128> {
        self.to_u128().and_then(|v| i128::try_from(v).ok())
    }
}

impl From<u64> for Operand {
    fn from(v: u64) -> Self {
        Self::from_u64(v)
    }
}

impl From<BigUint> for Operand {
    fn from(v: BigUint) -> Self {
        Self::new(v)
    }
}

impl FromStr for Operand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::invalid(format!("not a decimal integer: {s:?}")));
        }
        let digits: Vec<u8> = s.bytes().map(|b| b - b'0').collect();
        Self::from_digits(&digits)
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operand({self})")
    }
}

// Serialized as a decimal string so arbitrarily large values survive JSON.
impl Serialize for Operand {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Operand {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helpers for `BigUint` as a decimal string.
pub mod biguint_decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10)
            .ok_or_else(|| serde::de::Error::custom(format!("not a decimal integer: {s:?}")))
    }
}
