//! Shared on-chain value types.
//!
//! Every quantity that lives on chain (amounts, reserves, gas prices) is an
//! unsigned 256-bit integer carried in `0x`-prefixed hex on the wire. Nothing
//! in this module touches floating point; conversion to USD happens much
//! later, in the metrics layer, and only there.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HexError {
    #[error("missing 0x prefix: {0:?}")]
    MissingPrefix(String),
    #[error("invalid hex digit: {0:?}")]
    InvalidDigit(String),
    #[error("expected {expected} bytes, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("odd number of hex digits: {0:?}")]
    OddLength(String),
    #[error("value does not fit in 256 bits")]
    Overflow,
}

fn strip_prefix(s: &str) -> Result<&str, HexError> {
    s.strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .ok_or_else(|| HexError::MissingPrefix(truncate_for_error(s)))
}

fn truncate_for_error(s: &str) -> String {
    if s.len() > 40 {
        format!("{}…", &s[..40])
    } else {
        s.to_string()
    }
}

fn nibble(c: u8, whole: &str) -> Result<u8, HexError> {
    match c {
        b'0'..=b'9' => Ok(c - b'0'),
        b'a'..=b'f' => Ok(c - b'a' + 10),
        b'A'..=b'F' => Ok(c - b'A' + 10),
        _ => Err(HexError::InvalidDigit(truncate_for_error(whole))),
    }
}

/// Decodes `0x`-prefixed hex into bytes. Requires an even digit count; byte
/// strings have no implicit leading zero, unlike integers.
pub fn hex_to_bytes(s: &str) -> Result<Vec<u8>, HexError> {
    let digits = strip_prefix(s)?;
    if digits.len() % 2 != 0 {
        return Err(HexError::OddLength(truncate_for_error(s)));
    }
    let raw = digits.as_bytes();
    let mut out = Vec::with_capacity(raw.len() / 2);
    for pair in raw.chunks(2) {
        out.push(nibble(pair[0], s)? << 4 | nibble(pair[1], s)?);
    }
    Ok(out)
}

/// Lowercase `0x`-prefixed hex of a byte slice.
pub fn bytes_to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 + bytes.len() * 2);
    s.push_str("0x");
    for b in bytes {
        s.push(char::from_digit((b >> 4) as u32, 16).unwrap());
        s.push(char::from_digit((b & 0xf) as u32, 16).unwrap());
    }
    s
}

/// Unsigned 256-bit integer. The range invariant is checked on every
/// constructing operation; arithmetic that would leave the 256-bit range
/// reports [`HexError::Overflow`] instead of wrapping.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct U256(BigUint);

impl U256 {
    pub const BITS: u64 = 256;

    pub fn zero() -> Self {
        U256(BigUint::zero())
    }

    pub fn from_u64(v: u64) -> Self {
        U256(BigUint::from(v))
    }

    pub fn from_u128(v: u128) -> Self {
        U256(BigUint::from(v))
    }

    /// Wraps an arbitrary-precision value, enforcing the 256-bit bound.
    pub fn from_biguint(v: BigUint) -> Result<Self, HexError> {
        if v.bits() > Self::BITS {
            return Err(HexError::Overflow);
        }
        Ok(U256(v))
    }

    /// Parses `0x`-prefixed hex. Odd digit counts are accepted for integers
    /// (`0x0`, `0xabc`), leading zeros are tolerated.
    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        let digits = strip_prefix(s)?;
        if digits.is_empty() {
            return Err(HexError::InvalidDigit(truncate_for_error(s)));
        }
        if digits.len() > 64 {
            // More than 64 digits can still be in range if the extras are
            // zeros, so only reject once the significant part is measured.
            let trimmed = digits.trim_start_matches('0');
            if trimmed.len() > 64 {
                return Err(HexError::Overflow);
            }
        }
        let mut acc = BigUint::zero();
        for &c in digits.as_bytes() {
            acc = acc * 16u8 + nibble(c, s)?;
        }
        Ok(U256(acc))
    }

    /// Minimal lowercase hex rendering (`0x0` for zero, no leading zeros).
    pub fn to_hex(&self) -> String {
        format!("0x{}", self.0.to_str_radix(16))
    }

    /// Big-endian 32-byte representation, left padded.
    pub fn to_be_bytes32(&self) -> [u8; 32] {
        let raw = self.0.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - raw.len()..].copy_from_slice(&raw);
        out
    }

    pub fn from_be_bytes(bytes: &[u8]) -> Result<Self, HexError> {
        if bytes.len() > 32 {
            return Err(HexError::Overflow);
        }
        Ok(U256(BigUint::from_bytes_be(bytes)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_add(&self, rhs: &U256) -> Result<U256, HexError> {
        U256::from_biguint(&self.0 + &rhs.0)
    }

    pub fn checked_sub(&self, rhs: &U256) -> Option<U256> {
        if self.0 >= rhs.0 {
            Some(U256(&self.0 - &rhs.0))
        } else {
            None
        }
    }

    pub fn checked_mul(&self, rhs: &U256) -> Result<U256, HexError> {
        U256::from_biguint(&self.0 * &rhs.0)
    }

    /// Floor division; `None` on division by zero.
    pub fn checked_div(&self, rhs: &U256) -> Option<U256> {
        if rhs.0.is_zero() {
            None
        } else {
            Some(U256(&self.0 / &rhs.0))
        }
    }

    /// Lossy conversion used exclusively by the USD layer.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn as_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    pub fn biguint(&self) -> &BigUint {
        &self.0
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U256({})", self.to_hex())
    }
}

impl fmt::Display for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for U256 {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        U256::from_hex(s)
    }
}

impl Serialize for U256 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for U256 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        U256::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

macro_rules! fixed_bytes_type {
    ($name:ident, $len:expr, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;
            pub const ZERO: $name = $name([0u8; $len]);

            pub fn from_hex(s: &str) -> Result<Self, HexError> {
                let bytes = hex_to_bytes(s)?;
                if bytes.len() != $len {
                    return Err(HexError::BadLength {
                        expected: $len,
                        actual: bytes.len(),
                    });
                }
                let mut out = [0u8; $len];
                out.copy_from_slice(&bytes);
                Ok($name(out))
            }

            pub fn to_hex(&self) -> String {
                bytes_to_hex(&self.0)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "({})"), self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = HexError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::from_hex(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                $name::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes_type!(Address, 20, "20-byte account or token address.");
fixed_bytes_type!(TxHash, 32, "32-byte transaction hash.");

impl Address {
    /// Sentinel many routers use for the chain's native asset in place of an
    /// ERC-20 address (twenty `0xee` bytes).
    pub const NATIVE_SENTINEL: Address = Address([0xee; 20]);
}
