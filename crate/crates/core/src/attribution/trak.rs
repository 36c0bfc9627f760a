// SPDX-License-Identifier: MIT OR Apache-2.0

//! The TRAK estimator and its term ablations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureBundle;
use super::scores::{AttributionMatrix, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};

/// Leverage values are capped here so `1 − h` stays positive when the Gram
/// matrix needed jitter.
const MAX_LEVERAGE: f64 = 1.0 - 1e-6;

/// How ensemble members are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of `φ(ΦᵀΦ)⁻¹Φᵀ` times the mean of `Q`.
    #[default]
    Out,
    /// Mean of the full per-member product `φ(ΦᵀΦ)⁻¹ΦᵀQ`.
    In,
}

/// Switches for the estimator's terms. The default is the standard estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrakOptions {
    /// Use `(ΦᵀΦ)⁻¹`; `false` replaces it with the identity.
    pub reweight: bool,
    /// Multiply column `i` by `q_i`.
    pub use_q: bool,
    /// Use `ΦᵀRΦ` with `R = diag(q(1−q))` in place of `ΦᵀΦ`.
    pub r_weighting: bool,
    /// Divide column `i` by `1 − h_i`.
    pub leverage: bool,
    pub averaging: Averaging,
}

impl Default for TrakOptions {
    fn default() -> Self {
        TrakOptions {
            reweight: true,
            use_q: true,
            r_weighting: false,
            leverage: false,
            averaging: Averaging::Out,
        }
    }
}

impl TrakOptions {
    /// Short label used in reports.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if !self.reweight {
            parts.push("no_reweight");
        }
        if !self.use_q {
            parts.push("no_q");
        }
        if self.r_weighting {
            parts.push("with_r");
        }
        if self.leverage {
            parts.push("with_leverage");
        }
        if self.averaging == Averaging::In {
            parts.push("avg_in");
        }
        if parts.is_empty() {
            "trak".into()
        } else {
            format!("trak[{}]", parts.join(","))
        }
    }
}

/// `φ_test · G⁻¹ · Φᵀ` with the per-column leverage correction applied.
fn projector_term(bundle: &FeatureBundle, opts: &TrakOptions) -> Result<DenseMatrix> {
    bundle.validate()?;
    if bundle.n_train() == 0 {
        return Err(Error::invalid("TRAK needs at least one training example"));
    }
    let phi = &bundle.train_features;
    let r: Vec<f64> = bundle.q_diag.iter().map(|q| q * (1.0 - q)).collect();
    if !opts.reweight {
        return bundle.test_features.matmul_transb(phi);
    }
    let gram = if opts.r_weighting {
        phi.weighted_gram(Some(&r))?
    } else {
        phi.gram()
    };
    let chol = Cholesky::factor_with_jitter(&gram)?;
    let a = chol.solve_rows(&bundle.test_features)?;
    let mut t = a.matmul_transb(phi)?;
    if opts.leverage {
        let inv: Vec<f64> = (0..bundle.n_train())
            .map(|i| {
                let w = if opts.r_weighting { r[i] } else { 1.0 };
                let h = (chol.quad_form(phi.row(i)) * w).min(MAX_LEVERAGE);
                1.0 / (1.0 - h)
            })
            .collect();
        t.scale_columns(&inv)?;
    }
    Ok(t)
}

fn provenance(bundles: &[FeatureBundle]) -> Provenance {
    Provenance {
        checkpoint_ids: bundles.iter().map(|b| b.model_index).collect(),
        spec_hash: bundles.first().map(|b| b.spec_hash.clone()).unwrap_or_default(),
        dataset_hash: bundles.first().map(|b| b.dataset_hash.clone()).unwrap_or_default(),
    }
}

/// Single-model estimator `T = φ_test (ΦᵀΦ)⁻¹ Φᵀ diag(q)`.
pub fn trak_single(bundle: &FeatureBundle) -> Result<AttributionMatrix> {
    trak_single_with(bundle, &TrakOptions::default())
}

pub fn trak_single_with(bundle: &FeatureBundle, opts: &TrakOptions) -> Result<AttributionMatrix> {
    trak_ensemble_with(std::slice::from_ref(bundle), opts)
}

/// Ensemble estimator over `M` members, "averaging out" by default.
pub fn trak_ensemble(bundles: &[FeatureBundle]) -> Result<AttributionMatrix> {
    trak_ensemble_with(bundles, &TrakOptions::default())
}

pub fn trak_ensemble_with(bundles: &[FeatureBundle], opts: &TrakOptions) -> Result<AttributionMatrix> {
    let first = bundles
        .first()
        .ok_or_else(|| Error::invalid("TRAK ensemble needs at least one bundle"))?;
    for b in &bundles[1..] {
        if b.n_train() != first.n_train() || b.n_test() != first.n_test() || b.k() != first.k() {
            return Err(Error::invalid(format!(
                "bundle {} has shape ({}, {}, k={}), expected ({}, {}, k={})",
                b.model_index,
                b.n_train(),
                b.n_test(),
                b.k(),
                first.n_train(),
                first.n_test(),
                first.k()
            )));
        }
        if b.dataset_hash != first.dataset_hash {
            return Err(Error::HashMismatch {
                what: "bundle dataset",
                expected: first.dataset_hash.clone(),
                found: b.dataset_hash.clone(),
            });
        }
    }
    let m = bundles.len() as f64;
    let terms = bundles
        .par_iter()
        .map(|b| {
            let mut t = projector_term(b, opts)?;
            if opts.use_q && opts.averaging == Averaging::In {
                t.scale_columns(&b.q_diag)?;
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = terms.into_iter();
    let mut total = iter.next().expect("non-empty");
    for t in iter {
        total.add_assign(&t)?;
    }
    let mut scores = total.scaled(1.0 / m);
    if opts.use_q && opts.averaging == Averaging::Out {
        let mut q_mean = vec![0.0; first.n_train()];
        for b in bundles {
            for (acc, q) in q_mean.iter_mut().zip(&b.q_diag) {
                *acc += q;
            }
        }
        q_mean.iter_mut().for_each(|q| *q /= m);
        scores.scale_columns(&q_mean)?;
    }
    AttributionMatrix::new(scores, opts.label(), provenance(bundles))
}

/// Entrywise soft threshold `(t−λ)·1{t>λ} + (t+λ)·1{t<−λ}`.
pub fn soft_threshold(t: &AttributionMatrix, lambda: f64) -> Result<AttributionMatrix> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("threshold must be non-negative, got {lambda}")));
    }
    let mut scores = t.scores.clone();
    for v in scores.as_mut_slice() {
        *v = shrink(*v, lambda);
    }
    t.with_scores(scores, t.method.clone())
}

#[inline]
fn shrink(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Per-row soft threshold at the `(k+1)`-th largest magnitude, leaving `k`
/// non-zero entries per row when magnitudes are distinct. `k ≥ n` keeps the
/// row unchanged.
pub fn top_k_threshold(t: &AttributionMatrix, k: usize) -> Result<AttributionMatrix> {
    let n = t.n_train();
    let mut scores = t.scores.clone();
    if k < n {
        let mut mags = vec![0.0; n];
        for row in scores.as_mut_slice().chunks_exact_mut(n.max(1)) {
            for (m, v) in mags.iter_mut().zip(row.iter()) {
                *m = v.abs();
            }
            let (_, lambda, _) = mags.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
            let lambda = *lambda;
            for v in row.iter_mut() {
                *v = shrink(*v, lambda);
            }
        }
    }
    t.with_scores(scores, t.method.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ProjectionSpec;
    use crate::training::SubsetMask;

    fn bundle(phi: DenseMatrix, test: DenseMatrix, q: Vec<f64>) -> FeatureBundle {
        let n = phi.rows();
        let k = phi.cols();
        FeatureBundle {
            model_index: 0,
            train_features: phi,
            test_features: test,
            q_diag: q,
            mask: SubsetMask::full(n),
            projection: ProjectionSpec::new(0, 1, k),
            dataset_hash: String::new(),
            spec_hash: String::new(),
        }
    }

    fn matrix(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn scalar_case() {
        let b = bundle(matrix(&[vec![2.0]]), matrix(&[vec![2.0]]), vec![0.5]);
        let t = trak_single(&b).unwrap();
        assert!((t.scores.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_rows_give_inner_products() {
        let phi = matrix(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let test = matrix(&[vec![0.3, -2.0, 5.0]]);
        let b = bundle(phi, test, vec![1.0 - 1e-12; 3]);
        let opts = TrakOptions {
            use_q: false,
            ..TrakOptions::default()
        };
        let t = trak_single_with(&b, &opts).unwrap();
        for (got, want) in t.row(0).iter().zip([0.3, -2.0, 5.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_members_equal_single() {
        let phi = DenseMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
        let test = DenseMatrix::from_fn(2, 3, |i, j| (i + j) as f64 * 0.5 - 0.7);
        let b = bundle(phi, test, vec![0.2, 0.4, 0.6, 0.1, 0.9, 0.3]);
        let single = trak_single(&b).unwrap();
        let triple = trak_ensemble(&[b.clone(), b.clone(), b.clone()]).unwrap();
        assert!(single.scores.max_rel_diff(&triple.scores, 1e-12) < 1e-12);
        let one = trak_ensemble(std::slice::from_ref(&b)).unwrap();
        assert_eq!(one.scores, single.scores);
    }

    #[test]
    fn averaging_in_and_out_agree_for_identical_q() {
        let phi1 = DenseMatrix::from_fn(5, 2, |i, j| (i as f64 + 1.0) * if j == 0 { 1.0 } else { -0.3 });
        let phi2 = DenseMatrix::from_fn(5, 2, |i, j| ((i * j) as f64).sin() + 0.5);
        let test = DenseMatrix::from_fn(1, 2, |_, j| j as f64 + 1.0);
        let q = vec![0.3; 5];
        let a = bundle(phi1, test.clone(), q.clone());
        let b = bundle(phi2, test, q);
        let out = trak_ensemble(&[a.clone(), b.clone()]).unwrap();
        let opts = TrakOptions {
            averaging: Averaging::In,
            ..TrakOptions::default()
        };
        let inn = trak_ensemble_with(&[a, b], &opts).unwrap();
        assert!(out.scores.max_rel_diff(&inn.scores, 1e-12) < 1e-12);
    }

    #[test]
    fn soft_threshold_examples() {
        let t = AttributionMatrix::new(matrix(&[vec![3.0, -1.0, 0.5]]), "x", Provenance::default()).unwrap();
        assert_eq!(soft_threshold(&t, 0.0).unwrap().scores, t.scores);
        assert_eq!(soft_threshold(&t, 1.0).unwrap().row(0), &[2.0, 0.0, 0.0]);
        assert!(soft_threshold(&t, -1.0).is_err());
    }

    #[test]
    fn top_k_keeps_k_entries() {
        let t = AttributionMatrix::new(
            matrix(&[vec![3.0, -1.0, 0.5, -4.0], vec![0.1, 0.2, 0.3, 0.4]]),
            "x",
            Provenance::default(),
        )
        .unwrap();
        let s = top_k_threshold(&t, 2).unwrap();
        assert_eq!(s.row(0), &[2.0, 0.0, 0.0, -3.0]);
        let nz = s.row(1).iter().filter(|v| **v != 0.0).count();
        assert_eq!(nz, 2);
        assert_eq!(top_k_threshold(&t, 4).unwrap().scores, t.scores);
        assert!(top_k_threshold(&t, 0)
            .unwrap()
            .scores
            .as_slice()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn leverage_and_r_paths_run() {
        let phi = DenseMatrix::from_fn(8, 2, |i, j| ((i + 2 * j) as f64).cos());
        let test = DenseMatrix::from_fn(2, 2, |i, j| (i * 2 + j) as f64);
        let b = bundle(phi, test, vec![0.4; 8]);
        let opts = TrakOptions {
            r_weighting: true,
            leverage: true,
            ..TrakOptions::default()
        };
        let with = trak_single_with(&b, &opts).unwrap();
        // Constant R cancels in G⁻¹Φᵀ; leverage only inflates magnitudes.
        let plain = trak_single(&b).unwrap();
        for (w, p) in with.scores.as_slice().iter().zip(plain.scores.as_slice()) {
            let ratio = w / (p / 0.24);
            assert!(ratio >= 1.0 - 1e-12 || p.abs() < 1e-12, "{ratio}");
        }
    }
}
