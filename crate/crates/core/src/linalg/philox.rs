// SPDX-License-Identifier: MIT OR Apache-2.0

//! Philox4x32-10 counter-based generator (Salmon et al., Random123).
//!
//! Output is a pure function of a 128-bit counter and a 64-bit key, so any
//! coefficient of the projection matrix can be regenerated independently.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;
const ROUNDS: usize = 10;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

#[inline(always)]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(M0, ctr[0]);
    let (hi1, lo1) = mulhilo(M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// One Philox4x32-10 block.
#[inline]
pub fn philox4x32(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = round(ctr, key);
    let mut k = key;
    for _ in 1..ROUNDS {
        k[0] = k[0].wrapping_add(W0);
        k[1] = k[1].wrapping_add(W1);
        c = round(c, k);
    }
    c
}

#[inline]
pub fn key_from_seed(seed: u64) -> [u32; 2] {
    [seed as u32, (seed >> 32) as u32]
}

/// Uniform double in `(0, 1]` from 53 random bits.
#[inline]
pub fn unit_open_closed(hi: u32, lo: u32) -> f64 {
    let bits = ((u64::from(hi) << 32) | u64::from(lo)) >> 11;
    (bits as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}
