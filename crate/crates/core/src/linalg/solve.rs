// SPDX-License-Identifier: MIT OR Apache-2.0

//! Symmetric positive-definite solves.
//!
//! `psd_solve` factors `A = L·Lᵀ` and back-substitutes. When the
//! factorization breaks down it retries on `A + εI` with
//! `ε_j = 10⁻¹⁰ · (trace(A)/k) · 100^j` for `j = 0..JITTER_RETRIES`.
//! The ratio of 100 per retry means the last attempt adds
//! `10⁻² · trace(A)/k`.

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;

pub const JITTER_RETRIES: usize = 5;
const JITTER_BASE: f64 = 1e-10;
const JITTER_GROWTH: f64 = 100.0;
const SYMMETRY_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor, kept for repeated solves.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
    jitter: f64,
}

impl Cholesky {
    /// Factors `a` without jitter; `None` if `a` is not numerically positive definite.
    pub fn factor(a: &DenseMatrix) -> Option<Cholesky> {
        factor_shifted(a, 0.0)
    }

    /// Factors `a`, escalating diagonal jitter on failure.
    pub fn factor_with_jitter(a: &DenseMatrix) -> Result<Cholesky> {
        check_symmetric(a)?;
        if let Some(c) = factor_shifted(a, 0.0) {
            return Ok(c);
        }
        let k = a.rows().max(1) as f64;
        let mean_diag = a.trace() / k;
        let scale = if mean_diag > 0.0 && mean_diag.is_finite() {
            mean_diag
        } else {
            1.0
        };
        let mut eps = JITTER_BASE * scale;
        for _ in 0..JITTER_RETRIES {
            if let Some(c) = factor_shifted(a, eps) {
                return Ok(c);
            }
            eps *= JITTER_GROWTH;
        }
        Err(Error::Singular {
            attempts: JITTER_RETRIES,
            last_jitter: eps / JITTER_GROWTH,
        })
    }

    /// Diagonal shift that was needed to factor, `0.0` if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `A·x = b` in place.
    pub fn solve_vec_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows();
        let l = self.l.as_slice();
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= l[i * n + j] * b[j];
            }
            b[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= l[j * n + i] * b[j];
            }
            b[i] = s / l[i * n + i];
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("Cholesky::solve_vec", self.dim(), b.len())?;
        let mut x = b.to_vec();
        self.solve_vec_in_place(&mut x);
        Ok(x)
    }

    /// Solves `A·X = B` for a `k×m` right-hand side.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("Cholesky::solve", self.dim(), b.rows())?;
        // Work on Bᵀ so each right-hand side is contiguous.
        let mut bt = b.transpose();
        let k = self.dim();
        if k > 0 {
            for col in bt.as_mut_slice().chunks_exact_mut(k) {
                self.solve_vec_in_place(col);
            }
        }
        Ok(bt.transpose())
    }

    /// Solves `A·Xᵀ = Bᵀ` where `b` is `m×k`; returns the `m×k` matrix `X`.
    pub fn solve_rows(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("Cholesky::solve_rows", self.dim(), b.cols())?;
        let mut x = b.clone();
        let k = self.dim();
        if k > 0 {
            for row in x.as_mut_slice().chunks_exact_mut(k) {
                self.solve_vec_in_place(row);
            }
        }
        Ok(x)
    }

    /// `vᵀ A⁻¹ v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        // With A = L Lᵀ, vᵀA⁻¹v = ‖L⁻¹v‖².
        let n = self.dim();
        let l = self.l.as_slice();
        let mut y = v.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= l[i * n + j] * y[j];
            }
            y[i] = s / l[i * n + i];
        }
        y.iter().map(|t| t * t).sum()
    }
}

fn check_symmetric(a: &DenseMatrix) -> Result<()> {
    check_len("psd_solve: square", a.rows(), a.cols())?;
    a.require_finite("psd_solve input")?;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let n = a.rows();
    for i in 0..n {
        for j in 0..i {
            if (a.get(i, j) - a.get(j, i)).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "psd_solve: matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

fn factor_shifted(a: &DenseMatrix, shift: f64) -> Option<Cholesky> {
    let n = a.rows();
    let src = a.as_slice();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = src[j * n + j] + shift;
        for p in 0..j {
            d -= l[j * n + p] * l[j * n + p];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = src[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = s / djj;
        }
    }
    // A pivot that is tiny relative to the diagonal scale means the matrix is
    // numerically singular even though the arithmetic went through.
    let max_diag = (0..n).map(|i| src[i * n + i] + shift).fold(0.0, f64::max);
    let min_pivot = (0..n).map(|i| l[i * n + i]).fold(f64::INFINITY, f64::min);
    if n > 0 && min_pivot * min_pivot < 1e-14 * max_diag {
        return None;
    }
    Some(Cholesky {
        l: DenseMatrix::from_vec(n, n, l).ok()?,
        jitter: shift,
    })
}

/// Solves `A·X = B` for symmetric positive (semi-)definite `A` with the
/// jitter fallback described in the module docs.
pub fn psd_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    psd_solve_with_jitter(a, b).map(|(x, _)| x)
}

/// Like [`psd_solve`], also reporting the jitter that was applied.
pub fn psd_solve_with_jitter(a: &DenseMatrix, b: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    check_len("psd_solve: rhs rows", a.rows(), b.rows())?;
    b.require_finite("psd_solve rhs")?;
    let chol = Cholesky::factor_with_jitter(a)?;
    let x = chol.solve(b)?;
    Ok((x, chol.jitter()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve_returns_rhs() {
        let b = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 - 4.5);
        let x = psd_solve(&DenseMatrix::identity(4), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_solve() {
        let a = DenseMatrix::from_diag(&[2.0, 4.0]);
        let b = DenseMatrix::from_vec(2, 1, vec![2.0, 4.0]).unwrap();
        let x = psd_solve(&a, &b).unwrap();
        for v in x.as_slice() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn residual_on_random_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &k in &[1usize, 5, 20, 60] {
            let m = DenseMatrix::from_fn(k + 3, k, |_, _| rng.gen_range(-1.0..1.0));
            let mut a = m.gram();
            a.add_assign(&DenseMatrix::identity(k)).unwrap();
            let b = DenseMatrix::from_fn(k, 4, |_, _| rng.gen_range(-10.0..10.0));
            let (x, jitter) = psd_solve_with_jitter(&a, &b).unwrap();
            assert_eq!(jitter, 0.0);
            let ax = a.matmul(&x).unwrap();
            let mut worst: f64 = 0.0;
            for (u, v) in ax.as_slice().iter().zip(b.as_slice()) {
                worst = worst.max((u - v).abs());
            }
            assert!(worst < 1e-8 * b.max_abs(), "k={k} residual {worst}");
        }
    }

    #[test]
    fn rank_deficient_gram_gets_jitter() {
        // Rank 1 Gram in 3 dimensions.
        let phi = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        let g = phi.gram();
        let b = DenseMatrix::from_vec(3, 1, vec![1.0, 1.0, 1.0]).unwrap();
        let (x, jitter) = psd_solve_with_jitter(&g, &b).unwrap();
        assert!(jitter > 0.0);
        assert!(x.is_finite());
    }

    #[test]
    fn indefinite_matrix_is_irrecoverable() {
        let a = DenseMatrix::from_diag(&[1.0, -5.0]);
        let b = DenseMatrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(psd_solve(&a, &b), Err(Error::Singular { .. })));
    }

    #[test]
    fn asymmetric_rejected() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let b = DenseMatrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(psd_solve(&a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn quad_form_matches_solve() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let c = Cholesky::factor(&a).unwrap();
        let v = [1.0, -2.0];
        let x = c.solve_vec(&v).unwrap();
        let direct = v[0] * x[0] + v[1] * x[1];
        assert!((c.quad_form(&v) - direct).abs() < 1e-14);
    }
}
