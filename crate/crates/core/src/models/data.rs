// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::DenseMatrix;

/// One labelled example. `bias` shifts the binary margin (ignored for `c > 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: u64,
    pub x: Vec<f64>,
    pub y: usize,
    #[serde(default)]
    pub bias: f64,
}

impl Example {
    pub fn new(id: u64, x: Vec<f64>, y: usize) -> Self {
        Example { id, x, y, bias: 0.0 }
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias = bias;
        self
    }
}

/// Ordered training or test set. Attribution columns refer to positions here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    examples: Vec<Example>,
    class_count: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, class_count: usize, feature_dim: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::invalid("class_count must be at least 2"));
        }
        let mut ids = std::collections::HashSet::with_capacity(examples.len());
        for ex in &examples {
            check_len("Example.x", feature_dim, ex.x.len())?;
            check_finite("Example.x", &ex.x)?;
            if !ex.bias.is_finite() {
                return Err(Error::NonFinite("Example.bias"));
            }
            if ex.y >= class_count {
                return Err(Error::invalid(format!(
                    "example {} has label {} but class_count is {class_count}",
                    ex.id, ex.y
                )));
            }
            if !ids.insert(ex.id) {
                return Err(Error::invalid(format!("duplicate example id {}", ex.id)));
            }
        }
        Ok(Dataset {
            examples,
            class_count,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn get(&self, i: usize) -> &Example {
        &self.examples[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    /// Examples at the given positions, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            class_count: self.class_count,
            feature_dim: self.feature_dim,
        }
    }

    /// Examples reordered by `perm` (`new[i] = old[perm[i]]`).
    pub fn permuted(&self, perm: &[usize]) -> Dataset {
        self.subset(perm)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.y).collect()
    }

    /// Stacked inputs, one row per example.
    pub fn design_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.len(), self.feature_dim, |i, j| self.examples[i].x[j])
    }

    pub fn with_example_replaced(&self, i: usize, ex: Example) -> Result<Dataset> {
        let mut examples = self.examples.clone();
        examples[i] = ex;
        Dataset::new(examples, self.class_count, self.feature_dim)
    }

    /// SHA-256 over `(d, c, n)` and every example's id, label, bias and
    /// features as little-endian bit patterns. Hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"trak-dataset-v1");
        for v in [self.feature_dim, self.class_count, self.len()] {
            h.update((v as u64).to_le_bytes());
        }
        for ex in &self.examples {
            h.update(ex.id.to_le_bytes());
            h.update((ex.y as u64).to_le_bytes());
            h.update(ex.bias.to_bits().to_le_bytes());
            for v in &ex.x {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Example;
    type IntoIter = std::slice::Iter<'a, Example>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = Dataset::new(vec![Example::new(0, vec![1.0], 1)], 2, 1);
        assert!(ok.is_ok());
        assert!(Dataset::new(vec![Example::new(0, vec![1.0], 2)], 2, 1).is_err());
        assert!(Dataset::new(vec![Example::new(0, vec![f64::NAN], 0)], 2, 1).is_err());
        assert!(Dataset::new(vec![Example::new(0, vec![1.0], 0), Example::new(0, vec![2.0], 1)], 2, 1).is_err());
    }

    #[test]
    fn hash_sensitive_to_content_and_order() {
        let a = Dataset::new(vec![Example::new(0, vec![1.0], 0), Example::new(1, vec![2.0], 1)], 2, 1).unwrap();
        let b = a.permuted(&[1, 0]);
        let c = a
            .with_example_replaced(0, Example::new(0, vec![1.0], 0).with_bias(0.5))
            .unwrap();
        assert_eq!(a.content_hash(), a.clone().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
