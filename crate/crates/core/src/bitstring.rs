use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A binary assignment `x_0 x_1 ... x_{n-1}`.
///
/// Ordering is lexicographic with `x_0` most significant, which is the
/// tie-break order used by every solver. Printed as a string of `0`/`1`.
/// Basis index `b` of a statevector maps to the bitstring with `x_i` equal
/// to bit `i` of `b` (see [`Bitstring::from_index`]).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Bitstring(Vec<bool>);

impl Bitstring {
    pub fn zeros(len: usize) -> Self {
        Bitstring(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Bitstring(bits)
    }

    /// Bitstring whose bit `i` is bit `i` of `index`.
    pub fn from_index(index: u64, len: usize) -> Self {
        Bitstring((0..len).map(|i| (index >> i) & 1 == 1).collect())
    }

    /// Inverse of [`Bitstring::from_index`]. Panics past 64 bits.
    pub fn to_index(&self) -> u64 {
        assert!(self.0.len() <= 64, "bitstring too long for a basis index");
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl From<Vec<bool>> for Bitstring {
    fn from(bits: Vec<bool>) -> Self {
        Bitstring(bits)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parameter(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bitstring)
    }
}

impl Serialize for Bitstring {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let b = Bitstring::from_index(0b1011, 6);
        assert_eq!(b.to_string(), "110100");
        assert_eq!(b.to_index(), 0b1011);
    }

    #[test]
    fn lexicographic_order_is_x0_first() {
        let a: Bitstring = "0111".parse().unwrap();
        let b: Bitstring = "1000".parse().unwrap();
        assert!(a < b);
    }

    #[test]
    fn rejects_bad_characters() {
        assert!("01x".parse::<Bitstring>().is_err());
    }

    #[test]
    fn serde_as_string() {
        let b: Bitstring = "1010".parse().unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "\"1010\"");
        let back: Bitstring = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }
}
