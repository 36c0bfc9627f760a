// SPDX-License-Identifier: MIT OR Apache-2.0

//! Streaming seeded random projection.
//!
//! The projection matrix `P ∈ R^{p×k}` is never stored. Coefficient `P[i][j]`
//! is a pure function of `(seed, i, j)` computed with Philox4x32-10 keyed by
//! the 64-bit seed (low word first):
//!
//! * Rademacher: counter `[j / 128, 0, i_lo, i_hi]`; bit `j % 128` of the
//!   four output words (word `b / 32`, bit `b % 32`) selects `+1` (set) or `−1`.
//! * Gaussian: counter `[j / 2, 1, i_lo, i_hi]`; words `(o0,o1)` and `(o2,o3)`
//!   give 53-bit uniforms `u1, u2 ∈ (0,1]`, and Box–Muller yields
//!   `√(−2 ln u1)·cos(2πu2)` for even `j`, `·sin(2πu2)` for odd `j`.
//!
//! The input dimension is cut into `block_count` contiguous blocks of
//! `⌈p/K⌉` rows. Each block's partial projection is accumulated in row order
//! and the partials are summed in ascending block order, so results do not
//! depend on thread count. Outputs are scaled by `1/√k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::philox::{key_from_seed, philox4x32, unit_open_closed};
use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::DenseMatrix;

/// Output columns handled by one task; one Rademacher Philox draw covers it.
const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Rademacher,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub seed: u64,
    pub input_dim: usize,
    pub output_dim: usize,
    #[serde(default)]
    pub distribution: Distribution,
    #[serde(default = "default_blocks")]
    pub block_count: usize,
}

fn default_blocks() -> usize {
    100
}

impl ProjectionSpec {
    pub fn new(seed: u64, input_dim: usize, output_dim: usize) -> Self {
        ProjectionSpec {
            seed,
            input_dim,
            output_dim,
            distribution: Distribution::Rademacher,
            block_count: default_blocks(),
        }
    }

    pub fn with_distribution(mut self, distribution: Distribution) -> Self {
        self.distribution = distribution;
        self
    }

    pub fn with_blocks(mut self, block_count: usize) -> Self {
        self.block_count = block_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("projection input_dim must be positive"));
        }
        if self.output_dim == 0 {
            return Err(Error::invalid("projection output_dim must be positive"));
        }
        if self.block_count == 0 {
            return Err(Error::invalid("projection block_count must be positive"));
        }
        Ok(())
    }
}

/// Stateless handle over a [`ProjectionSpec`]; cheap to clone and share.
#[derive(Debug, Clone)]
pub struct Projector {
    spec: ProjectionSpec,
    key: [u32; 2],
    block_len: usize,
}

pub fn make_projector(spec: ProjectionSpec) -> Result<Projector> {
    Projector::new(spec)
}

impl Projector {
    pub fn new(spec: ProjectionSpec) -> Result<Self> {
        spec.validate()?;
        let block_len = spec.input_dim.div_ceil(spec.block_count);
        Ok(Projector {
            key: key_from_seed(spec.seed),
            block_len,
            spec,
        })
    }

    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    /// Row ranges of the input blocks, in accumulation order.
    pub fn blocks(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let p = self.spec.input_dim;
        (0..p)
            .step_by(self.block_len)
            .map(move |start| start..(start + self.block_len).min(p))
    }

    /// Unscaled coefficient `P[i][j]`.
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        let mut out = [0.0; 1];
        self.fill_coefficients(i, j, &mut out);
        out[0]
    }

    /// Writes unscaled `P[i][j0..j0+out.len()]`.
    fn fill_coefficients(&self, i: usize, j0: usize, out: &mut [f64]) {
        let (ilo, ihi) = (i as u32, (i >> 32) as u32);
        match self.spec.distribution {
            Distribution::Rademacher => {
                let mut word = usize::MAX;
                let mut bits = [0u32; 4];
                for (t, o) in out.iter_mut().enumerate() {
                    let j = j0 + t;
                    if j / CHUNK != word {
                        word = j / CHUNK;
                        bits = philox4x32([word as u32, 0, ilo, ihi], self.key);
                    }
                    let b = j % CHUNK;
                    let set = (bits[b / 32] >> (b % 32)) & 1 == 1;
                    *o = if set { 1.0 } else { -1.0 };
                }
            }
            Distribution::Gaussian => {
                let mut pair = usize::MAX;
                let mut z = [0.0f64; 2];
                for (t, o) in out.iter_mut().enumerate() {
                    let j = j0 + t;
                    if j / 2 != pair {
                        pair = j / 2;
                        let w = philox4x32([pair as u32, 1, ilo, ihi], self.key);
                        let u1 = unit_open_closed(w[0], w[1]);
                        let u2 = unit_open_closed(w[2], w[3]);
                        let r = (-2.0 * u1.ln()).sqrt();
                        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
                        z = [r * c, r * s];
                    }
                    *o = z[j % 2];
                }
            }
        }
    }

    /// `(1/√k)·Pᵀg` for a single gradient.
    pub fn project(&self, g: &[f64]) -> Result<Vec<f64>> {
        let m = DenseMatrix::from_vec(1, g.len(), g.to_vec())?;
        Ok(self.project_batch(&m)?.into_vec())
    }

    /// Projects every row of a `b×p` matrix of stacked gradients.
    pub fn project_batch(&self, grads: &DenseMatrix) -> Result<DenseMatrix> {
        let p = self.spec.input_dim;
        let k = self.spec.output_dim;
        check_len("Projector::project_batch", p, grads.cols())?;
        check_finite("projection input", grads.as_slice())?;
        let b = grads.rows();
        let gt = grads.transpose();
        let gt = gt.as_slice();
        let scale = 1.0 / (k as f64).sqrt();
        let blocks: Vec<_> = self.blocks().collect();

        let chunks: Vec<(usize, Vec<f64>)> = (0..k.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let j0 = c * CHUNK;
                let w = CHUNK.min(k - j0);
                let mut acc = vec![0.0; b * w];
                let mut part = vec![0.0; b * w];
                let mut coef = vec![0.0; w];
                for range in &blocks {
                    part.iter_mut().for_each(|v| *v = 0.0);
                    for i in range.clone() {
                        self.fill_coefficients(i, j0, &mut coef);
                        let g_col = &gt[i * b..(i + 1) * b];
                        for (r, &gi) in g_col.iter().enumerate() {
                            if gi == 0.0 {
                                continue;
                            }
                            for (dst, &cv) in part[r * w..(r + 1) * w].iter_mut().zip(&coef) {
                                *dst += gi * cv;
                            }
                        }
                    }
                    for (a, v) in acc.iter_mut().zip(&part) {
                        *a += v;
                    }
                }
                (j0, acc)
            })
            .collect();

        let mut out = DenseMatrix::zeros(b, k);
        for (j0, acc) in chunks {
            let w = CHUNK.min(k - j0);
            for r in 0..b {
                for t in 0..w {
                    out.set(r, j0 + t, acc[r * w + t] * scale);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_project(proj: &Projector, g: &[f64]) -> Vec<f64> {
        let k = proj.output_dim();
        (0..k)
            .map(|j| {
                g.iter()
                    .enumerate()
                    .map(|(i, gi)| gi * proj.coefficient(i, j))
                    .sum::<f64>()
                    / (k as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(make_projector(ProjectionSpec::new(1, 0, 4)).is_err());
        assert!(make_projector(ProjectionSpec::new(1, 4, 0)).is_err());
        assert!(make_projector(ProjectionSpec::new(1, 4, 4).with_blocks(0)).is_err());
    }

    #[test]
    fn same_spec_same_stream() {
        let a = make_projector(ProjectionSpec::new(7, 100, 16)).unwrap();
        let b = make_projector(ProjectionSpec::new(7, 100, 16)).unwrap();
        for i in 0..100 {
            for j in 0..16 {
                assert_eq!(a.coefficient(i, j).to_bits(), b.coefficient(i, j).to_bits());
            }
        }
    }

    #[test]
    fn rademacher_coefficients_are_signs() {
        let p = make_projector(ProjectionSpec::new(7, 100, 300)).unwrap();
        let mut plus = 0usize;
        for i in 0..100 {
            for j in 0..300 {
                let c = p.coefficient(i, j);
                assert!(c == 1.0 || c == -1.0);
                plus += usize::from(c > 0.0);
            }
        }
        let frac = plus as f64 / 30_000.0;
        assert!((frac - 0.5).abs() < 0.02, "frac {frac}");
    }

    #[test]
    fn different_seeds_disagree_about_half_the_time() {
        let a = make_projector(ProjectionSpec::new(7, 100, 100)).unwrap();
        let b = make_projector(ProjectionSpec::new(8, 100, 100)).unwrap();
        let differ = (0..100)
            .flat_map(|i| (0..100).map(move |j| (i, j)))
            .filter(|&(i, j)| a.coefficient(i, j) != b.coefficient(i, j))
            .count();
        assert!(differ as f64 >= 0.4e4, "only {differ} of 10^4 differ");
    }

    #[test]
    fn gaussian_moments() {
        let p = make_projector(ProjectionSpec::new(3, 200, 200).with_distribution(Distribution::Gaussian)).unwrap();
        let vals: Vec<f64> = (0..200)
            .flat_map(|i| (0..200).map(move |j| (i, j)))
            .map(|(i, j)| p.coefficient(i, j))
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn blocked_kernel_matches_naive_sum() {
        for dist in [Distribution::Rademacher, Distribution::Gaussian] {
            for blocks in [1, 3, 7, 100] {
                let spec = ProjectionSpec::new(5, 37, 150)
                    .with_distribution(dist)
                    .with_blocks(blocks);
                let proj = make_projector(spec).unwrap();
                let g: Vec<f64> = (0..37).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
                let fast = proj.project(&g).unwrap();
                let slow = naive_project(&proj, &g);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn batch_rows_match_single_projection() {
        let proj = make_projector(ProjectionSpec::new(9, 40, 20).with_blocks(4)).unwrap();
        let m = DenseMatrix::from_fn(3, 40, |r, c| (r as f64 + 1.0) * (c as f64).sin());
        let batch = proj.project_batch(&m).unwrap();
        for r in 0..3 {
            let single = proj.project(m.row(r)).unwrap();
            assert_eq!(single.as_slice(), batch.row(r));
        }
    }

    #[test]
    fn zero_and_non_finite_inputs() {
        let proj = make_projector(ProjectionSpec::new(1, 10, 4)).unwrap();
        assert!(proj.project(&[0.0; 10]).unwrap().iter().all(|v| *v == 0.0));
        let mut g = vec![1.0; 10];
        g[3] = f64::INFINITY;
        assert!(matches!(proj.project(&g), Err(Error::NonFinite(_))));
        assert!(proj.project(&[1.0; 9]).is_err());
    }

    #[test]
    fn rayon_pool_size_does_not_change_bits() {
        let proj = make_projector(ProjectionSpec::new(21, 1000, 300).with_blocks(13)).unwrap();
        let m = DenseMatrix::from_fn(2, 1000, |r, c| ((r * 1000 + c) as f64 * 0.37).cos());
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| proj.project_batch(&m).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| proj.project_batch(&m).unwrap());
        assert_eq!(one, four);
    }
}
