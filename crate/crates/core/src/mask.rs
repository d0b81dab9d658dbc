use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A candidate regression model: bit `j` is set when column `j` is active.
///
/// Ordering is lexicographic over the bit sequence, position 0 first, with
/// `0 < 1`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ModelMask {
    words: Vec<u64>,
    len: usize,
}

impl ModelMask {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut m = Self::empty(len);
        for j in 0..len {
            m.set(j, true);
        }
        m
    }

    pub fn from_indices(len: usize, active: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::empty(len);
        for j in active {
            assert!(j < len, "index {j} out of range for mask of length {len}");
            m.set(j, true);
        }
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_indices(
            bits.len(),
            bits.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j),
        )
    }

    /// Mask whose bit `j` is bit `j` of `code` (little-endian positions).
    pub fn from_code(len: usize, code: u64) -> Self {
        assert!(len <= 64);
        Self::from_indices(len, (0..len).filter(|&j| (code >> j) & 1 == 1))
    }

    /// Inverse of [`ModelMask::from_code`].
    pub fn code(&self) -> u64 {
        assert!(self.len <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.words[j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, on: bool) {
        debug_assert!(j < self.len);
        let bit = 1u64 << (j % 64);
        if on {
            self.words[j / 64] |= bit;
        } else {
            self.words[j / 64] &= !bit;
        }
    }

    #[inline]
    pub fn flip(&mut self, j: usize) {
        debug_assert!(j < self.len);
        self.words[j / 64] ^= 1u64 << (j % 64);
    }

    /// Number of active variables, `|u|`.
    pub fn size(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn active(&self) -> Vec<usize> {
        self.iter()
            .enumerate()
            .filter(|(_, b)| *b)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    pub fn hamming(&self, other: &ModelMask) -> Result<usize> {
        self.check_len(other.len)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    pub fn intersection_size(&self, other: &ModelMask) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset_of(&self, other: &ModelMask) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len == expected {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected,
                got: self.len,
            })
        }
    }
}

impl Ord for ModelMask {
    fn cmp(&self, other: &Self) -> Ordering {
        let common = self.len.min(other.len);
        for (wi, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let diff = a ^ b;
            if diff != 0 {
                let j = wi * 64 + diff.trailing_zeros() as usize;
                if j < common {
                    return if self.get(j) {
                        Ordering::Greater
                    } else {
                        Ordering::Less
                    };
                }
                break;
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for ModelMask {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ModelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for ModelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelMask({self})")
    }
}

impl FromStr for ModelMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut m = ModelMask::empty(s.len());
        for (j, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => m.set(j, true),
                other => {
                    return Err(Error::Parse(format!(
                        "invalid character {other:?} in mask string"
                    )))
                }
            }
        }
        Ok(m)
    }
}

impl Serialize for ModelMask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ModelMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse a mask file: one 0/1 string per line, blank lines and `#` comments
/// ignored. Every mask must have length `d`.
pub fn parse_mask_lines(text: &str, d: usize) -> Result<Vec<ModelMask>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let m: ModelMask = l.parse()?;
            m.check_len(d)?;
            Ok(m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let m: ModelMask = "10100".parse().unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(m.size(), 2);
        assert_eq!(m.active(), vec![0, 2]);
        assert_eq!(m.to_string(), "10100");
        assert!("10a".parse::<ModelMask>().is_err());
    }

    #[test]
    fn lexicographic_order() {
        let a: ModelMask = "0011".parse().unwrap();
        let b: ModelMask = "0100".parse().unwrap();
        let c: ModelMask = "1000".parse().unwrap();
        assert!(a < b && b < c);
        let long_a = ModelMask::from_indices(130, [100]);
        let long_b = ModelMask::from_indices(130, [70]);
        assert!(long_a < long_b);
    }

    #[test]
    fn mask_lines() {
        let masks = parse_mask_lines("# header\n101\n\n011\n", 3).unwrap();
        assert_eq!(masks.len(), 2);
        assert!(parse_mask_lines("1010\n", 3).is_err());
    }

    proptest! {
        #[test]
        fn order_matches_string_order(a in proptest::collection::vec(any::<bool>(), 1..150),
                                      flip in proptest::collection::vec(any::<bool>(), 150)) {
            let b: Vec<bool> = a.iter().zip(&flip).map(|(x, f)| x ^ f).collect();
            let ma = ModelMask::from_bools(&a);
            let mb = ModelMask::from_bools(&b);
            prop_assert_eq!(ma.cmp(&mb), ma.to_string().cmp(&mb.to_string()));
            prop_assert_eq!(ma.hamming(&mb).unwrap(), a.iter().zip(&b).filter(|(x, y)| x != y).count());
            let parsed: ModelMask = ma.to_string().parse().unwrap();
            prop_assert_eq!(parsed, ma);
        }
    }
}
