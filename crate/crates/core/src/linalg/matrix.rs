// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

// Below this many multiply-adds a product runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("DenseMatrix::from_vec", rows * cols, data.len())?;
        check_finite("DenseMatrix::from_vec", &data)?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("DenseMatrix::from_rows", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        check_len("DenseMatrix::add_assign rows", self.rows, other.rows)?;
        check_len("DenseMatrix::add_assign cols", self.cols, other.cols)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Multiplies column `j` by `scale[j]`.
    pub fn scale_columns(&mut self, scale: &[f64]) -> Result<()> {
        check_len("DenseMatrix::scale_columns", self.cols, scale.len())?;
        for row in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (v, s) in row.iter_mut().zip(scale) {
                *v *= s;
            }
        }
        Ok(())
    }

    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, idx.len(), |i, j| self.get(i, idx[j]))
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("DenseMatrix::matmul", self.cols, other.rows)?;
        let (n, m) = (self.rows, other.cols);
        let mut out = DenseMatrix::zeros(n, m);
        if m == 0 {
            return Ok(out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a_row = self.row(i);
            for (l, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        };
        if n * m * self.cols >= PAR_THRESHOLD {
            out.data.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `self · otherᵀ`; both operands are read row-wise.
    pub fn matmul_transb(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("DenseMatrix::matmul_transb", self.cols, other.cols)?;
        let (n, m) = (self.rows, other.rows);
        let mut out = DenseMatrix::zeros(n, m);
        if m == 0 {
            return Ok(out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a = self.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        };
        if n * m * self.cols >= PAR_THRESHOLD {
            out.data.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `selfᵀ · self`, the Gram matrix of the columns.
    pub fn gram(&self) -> DenseMatrix {
        self.weighted_gram(None).expect("unweighted gram cannot fail")
    }

    /// `selfᵀ · diag(w) · self`.
    pub fn weighted_gram(&self, weights: Option<&[f64]>) -> Result<DenseMatrix> {
        if let Some(w) = weights {
            check_len("DenseMatrix::weighted_gram", self.rows, w.len())?;
        }
        let k = self.cols;
        let mut g = DenseMatrix::zeros(k, k);
        for (i, row) in self.row_iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            for a in 0..k {
                let ra = row[a] * w;
                if ra == 0.0 {
                    continue;
                }
                let g_row = &mut g.data[a * k..(a + 1) * k];
                for b in a..k {
                    g_row[b] += ra * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                g.data[a * k + b] = g.data[b * k + a];
            }
        }
        Ok(g)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("DenseMatrix::matvec", self.cols, v.len())?;
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise relative difference `|a−b| / max(|a|,|b|,floor)`.
    pub fn max_rel_diff(&self, other: &DenseMatrix, floor: f64) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }

    pub(crate) fn require_finite(&self, context: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context))
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[19.0, 22.0, 43.0, 50.0]);
        let ct = a.matmul_transb(&b.transpose()).unwrap();
        assert_eq!(ct, c);
    }

    #[test]
    fn gram_matches_explicit_product() {
        let a = DenseMatrix::from_fn(7, 3, |i, j| (i as f64 - 2.0) * (j as f64 + 0.5));
        let g = a.gram();
        let explicit = a.transpose().matmul(&a).unwrap();
        assert!(g.max_rel_diff(&explicit, 1e-300) < 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0]).is_err());
    }
}
