// SPDX-License-Identifier: MIT OR Apache-2.0

//! Inner-product preservation of the seeded projection on random unit vectors.
//!
//! cargo run --release --example projection_jl -- [p] [k] [pairs]

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use trak::linalg::{dot, make_projector, DenseMatrix, ProjectionSpec};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> trak::Result<()> {
    let (p, k, pairs) = (arg(1, 50_000), arg(2, 2048), arg(3, 100));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows = DenseMatrix::from_fn(2 * pairs, p, |_, _| StandardNormal.sample(&mut rng));
    let unit: Vec<f64> = rows
        .row_iter()
        .flat_map(|r| {
            let norm = dot(r, r).sqrt();
            r.iter().map(move |v| v / norm).collect::<Vec<_>>()
        })
        .collect();
    let unit = DenseMatrix::from_vec(2 * pairs, p, unit)?;

    let projector = make_projector(ProjectionSpec::new(9, p, k))?;
    let start = Instant::now();
    let phi = projector.project_batch(&unit)?;
    println!("projected {} vectors {p} -> {k} in {:.2?}", 2 * pairs, start.elapsed());

    let mut errs: Vec<f64> = (0..pairs)
        .map(|t| {
            let (a, b) = (2 * t, 2 * t + 1);
            (dot(phi.row(a), phi.row(b)) - dot(unit.row(a), unit.row(b))).abs()
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    println!(
        "inner-product error: median {:.4}, max {:.4} (1/sqrt(k) = {:.4})",
        errs[pairs / 2],
        errs[pairs - 1],
        1.0 / (k as f64).sqrt()
    );
    Ok(())
}
