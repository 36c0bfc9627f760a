// SPDX-License-Identifier: MIT OR Apache-2.0

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::seq::index;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seed;

/// Membership indicator over the ordered training set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    bits: Vec<bool>,
}

impl SubsetMask {
    pub fn full(n: usize) -> Self {
        SubsetMask { bits: vec![true; n] }
    }

    pub fn empty(n: usize) -> Self {
        SubsetMask { bits: vec![false; n] }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        SubsetMask { bits }
    }

    pub fn from_indices(n: usize, idx: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &i in idx {
            if i >= n {
                return Err(Error::invalid(format!("mask index {i} out of range {n}")));
            }
            bits[i] = true;
        }
        Ok(SubsetMask { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }

    /// Copy with the given positions removed from the subset.
    pub fn without(&self, idx: &[usize]) -> SubsetMask {
        let mut bits = self.bits.clone();
        for &i in idx {
            bits[i] = false;
        }
        SubsetMask { bits }
    }

    /// Bit `i` stored at byte `i/8`, bit `i%8` (LSB first), base64 encoded.
    pub fn to_base64(&self) -> String {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, b) in self.bits.iter().enumerate() {
            if *b {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        B64.encode(bytes)
    }

    pub fn from_base64(s: &str, n: usize) -> Result<Self> {
        let bytes = B64
            .decode(s)
            .map_err(|e| Error::Format(format!("bad mask encoding: {e}")))?;
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::Format(format!(
                "mask has {} bytes, expected {} for n = {n}",
                bytes.len(),
                n.div_ceil(8)
            )));
        }
        let bits = (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect();
        Ok(SubsetMask { bits })
    }
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    n: usize,
    bits: String,
}

impl Serialize for SubsetMask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MaskRepr {
            n: self.len(),
            bits: self.to_base64(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubsetMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MaskRepr::deserialize(d)?;
        SubsetMask::from_base64(&r.bits, r.n).map_err(serde::de::Error::custom)
    }
}

/// `⌈α·n⌉`, with a small tolerance so that e.g. `0.3·10` gives 3.
pub fn subset_size(n: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must be in (0, 1], got {alpha}")));
    }
    let raw = alpha * n as f64;
    if raw < 1.0 - 1e-9 {
        return Err(Error::invalid(format!("alpha·n = {raw} < 1")));
    }
    Ok(((raw - 1e-9).ceil() as usize).clamp(1, n))
}

/// `m` uniform without-replacement subsets of size `⌈α·n⌉`. Mask `j` depends
/// only on `(seed, j)`.
pub fn sample_subsets(n: usize, alpha: f64, m: usize, seed: u64) -> Result<Vec<SubsetMask>> {
    let size = subset_size(n, alpha)?;
    Ok((0..m)
        .map(|j| {
            let mut rng = seed::rng(seed, seed::TAG_MASK, j as u64);
            let picked = index::sample(&mut rng, n, size);
            let mut bits = vec![false; n];
            for i in picked.iter() {
                bits[i] = true;
            }
            SubsetMask { bits }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_one_gives_full_masks() {
        let masks = sample_subsets(13, 1.0, 4, 0).unwrap();
        assert!(masks.iter().all(|m| m.count() == 13));
    }

    #[test]
    fn exact_half() {
        for m in sample_subsets(10, 0.5, 50, 3).unwrap() {
            assert_eq!(m.count(), 5);
        }
        assert_eq!(subset_size(10, 0.3).unwrap(), 3);
        assert_eq!(subset_size(10, 0.31).unwrap(), 4);
    }

    #[test]
    fn invalid_alpha() {
        assert!(sample_subsets(10, 0.0, 1, 0).is_err());
        assert!(sample_subsets(10, 1.5, 1, 0).is_err());
        assert!(sample_subsets(10, 0.05, 1, 0).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(
            sample_subsets(40, 0.5, 5, 9).unwrap(),
            sample_subsets(40, 0.5, 5, 9).unwrap()
        );
        assert_ne!(
            sample_subsets(40, 0.5, 5, 9).unwrap(),
            sample_subsets(40, 0.5, 5, 10).unwrap()
        );
    }

    #[test]
    fn base64_round_trip_and_serde() {
        let m = SubsetMask::from_indices(11, &[0, 3, 8, 10]).unwrap();
        assert_eq!(SubsetMask::from_base64(&m.to_base64(), 11).unwrap(), m);
        let json = serde_json::to_string(&m).unwrap();
        let back: SubsetMask = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(SubsetMask::from_base64(&m.to_base64(), 30).is_err());
    }
}
