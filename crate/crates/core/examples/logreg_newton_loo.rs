// SPDX-License-Identifier: MIT OR Apache-2.0

//! One-step Newton leave-one-out estimates against exact retraining on
//! logistic regression.
//!
//! cargo run --release --example logreg_newton_loo -- [n] [d]

use std::time::Instant;

use trak::attribution::newton_loo;
use trak::evaluation::spearman;
use trak::models::synthetic::{logistic_family, sample_logistic_with};
use trak::models::{self, ModelSpec};
use trak::training::{train, SubsetMask, TrainConfig};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> trak::Result<()> {
    let (n, d) = (arg(1, 200), arg(2, 10));
    let (data, w) = logistic_family(n, d, 2.0, 21, 0);
    let test = sample_logistic_with(&w, 50, 22, n as u64);
    let spec = ModelSpec::logreg(d, 2);
    let cfg = TrainConfig::newton();
    let fit =
        |mask: &SubsetMask| train(&spec, &data, mask, &cfg).map(|mut r| r.pop().expect("final checkpoint").params);

    let start = Instant::now();
    let full = fit(&SubsetMask::full(n))?;
    let tau = newton_loo(&data, &test, &full, 0.0)?;
    println!("newton-loo scores in {:.1?}", start.elapsed());

    let start = Instant::now();
    let f_full = models::outputs(&spec, &full, &test)?;
    let mut exact = vec![vec![0.0; n]; test.len()];
    for i in 0..n {
        let f_loo = models::outputs(&spec, &fit(&SubsetMask::full(n).without(&[i]))?, &test)?;
        for (row, (a, b)) in exact.iter_mut().zip(f_full.iter().zip(&f_loo)) {
            row[i] = a - b;
        }
    }
    println!("{n} exact retrains in {:.1?}", start.elapsed());

    let rhos = (0..test.len())
        .map(|t| spearman(tau.row(t), &exact[t]).map(|s| s.rho))
        .collect::<trak::Result<Vec<_>>>()?;
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    let min = rhos.iter().copied().fold(f64::INFINITY, f64::min);
    println!("spearman vs exact LOO: mean {mean:.4}, min {min:.4}");
    Ok(())
}
