// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense linear algebra and the seeded random projection kernel.

mod matrix;
pub mod philox;
mod projection;
mod solve;

pub use matrix::{dot, norm2, DenseMatrix};
pub use projection::{make_projector, Distribution, ProjectionSpec, Projector};
pub use solve::{psd_solve, psd_solve_with_jitter, Cholesky, JITTER_RETRIES};
