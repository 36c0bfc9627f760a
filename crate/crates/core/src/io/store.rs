// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary matrix store.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                          |
//! |-------:|-----:|--------------------------------|
//! | 0      | 8    | magic `TRAKFS1\0`              |
//! | 8      | 4    | version (`u32`, currently 1)   |
//! | 12     | 4    | rows `n` (`u32`)               |
//! | 16     | 4    | cols `k` (`u32`)               |
//! | 20     | 1    | dtype (`0` = `f32`)            |
//! | 21     | 1    | payload kind, see [`StoreKind`] |
//! | 22     | 2    | reserved, zero                 |
//! | 24     | 4·n·k | row-major `f32` payload       |
//!
//! Values are held as `f64` in memory and rounded to `f32` on write, so a
//! matrix read back from disk re-encodes to identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: [u8; 8] = *b"TRAKFS1\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const DTYPE_F32: u8 = 0;

/// What a store file holds, recorded in the header's flag byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StoreKind {
    TrainFeatures = 0,
    QDiag = 1,
    Scores = 2,
    TestFeatures = 3,
}

impl StoreKind {
    fn from_flag(f: u8) -> Result<Self> {
        Ok(match f {
            0 => StoreKind::TrainFeatures,
            1 => StoreKind::QDiag,
            2 => StoreKind::Scores,
            3 => StoreKind::TestFeatures,
            other => return Err(Error::Format(format!("unknown store flag {other}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreHeader {
    pub version: u32,
    pub rows: u32,
    pub cols: u32,
    pub dtype: u8,
    pub kind: StoreKind,
}

impl StoreHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..8].copy_from_slice(&MAGIC);
        b[8..12].copy_from_slice(&self.version.to_le_bytes());
        b[12..16].copy_from_slice(&self.rows.to_le_bytes());
        b[16..20].copy_from_slice(&self.cols.to_le_bytes());
        b[20] = self.dtype;
        b[21] = self.kind as u8;
        b
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "file has {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if bytes[..8] != MAGIC {
            return Err(Error::Format("bad magic, not a feature store".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported store version {version}")));
        }
        let dtype = bytes[20];
        if dtype != DTYPE_F32 {
            return Err(Error::Format(format!("unsupported dtype code {dtype}")));
        }
        Ok(StoreHeader {
            version,
            rows: u32_at(12),
            cols: u32_at(16),
            dtype,
            kind: StoreKind::from_flag(bytes[21])?,
        })
    }

    pub fn payload_len(&self) -> usize {
        self.rows as usize * self.cols as usize * 4
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
}

/// Encodes a matrix as header plus `f32` payload.
pub fn encode_matrix(m: &DenseMatrix, kind: StoreKind) -> Result<Vec<u8>> {
    let header = StoreHeader {
        version: VERSION,
        rows: to_u32(m.rows(), "rows")?,
        cols: to_u32(m.cols(), "cols")?,
        dtype: DTYPE_F32,
        kind,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    out.extend_from_slice(&header.to_bytes());
    for &v in m.as_slice() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::NonFinite("value not representable as f32"));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// Decodes bytes written by [`encode_matrix`], checking the payload kind.
pub fn decode_matrix(bytes: &[u8], expected: StoreKind) -> Result<DenseMatrix> {
    let header = StoreHeader::parse(bytes)?;
    if header.kind != expected {
        return Err(Error::Format(format!(
            "store holds {:?}, expected {expected:?}",
            header.kind
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != header.payload_len() {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {}",
            payload.len(),
            header.payload_len()
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature store payload"));
    }
    DenseMatrix::from_vec(header.rows as usize, header.cols as usize, data)
}

pub fn write_matrix(path: &Path, m: &DenseMatrix, kind: StoreKind) -> Result<String> {
    let bytes = encode_matrix(m, kind)?;
    atomic_write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn read_matrix(path: &Path, kind: StoreKind) -> Result<DenseMatrix> {
    decode_matrix(&fs::read(path)?, kind)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_path(path);
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Rounds every entry to the nearest `f32`, as a write/read cycle would.
pub fn canonicalize_f32(m: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| f64::from(m.get(i, j) as f32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::from_fn(3, 2, |i, j| i as f64 * 0.1 - j as f64 / 3.0)
    }

    #[test]
    fn layout_arithmetic() {
        let bytes = encode_matrix(&sample(), StoreKind::TrainFeatures).unwrap();
        assert_eq!(bytes.len(), 24 + 24);
        assert_eq!(&bytes[..8], b"TRAKFS1\0");
        assert_eq!(bytes[12..16], 3u32.to_le_bytes());
        assert_eq!(bytes[16..20], 2u32.to_le_bytes());
        assert_eq!(bytes[20], 0);
        assert_eq!(bytes[21], 0);
        assert_eq!(bytes[24..28], 0.0f32.to_le_bytes());
        assert_eq!(bytes[28..32], ((-1.0f64 / 3.0) as f32).to_le_bytes());
    }

    #[test]
    fn round_trip_bytes() {
        let bytes = encode_matrix(&sample(), StoreKind::Scores).unwrap();
        let m = decode_matrix(&bytes, StoreKind::Scores).unwrap();
        assert_eq!(m, canonicalize_f32(&sample()));
        assert_eq!(encode_matrix(&m, StoreKind::Scores).unwrap(), bytes);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode_matrix(&sample(), StoreKind::TrainFeatures).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_matrix(&bad, StoreKind::TrainFeatures),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(decode_matrix(&bad, StoreKind::TrainFeatures).is_err());
        let mut bad = bytes.clone();
        bad[20] = 1;
        assert!(decode_matrix(&bad, StoreKind::TrainFeatures).is_err());
        assert!(decode_matrix(&bytes[..bytes.len() - 1], StoreKind::TrainFeatures).is_err());
        assert!(decode_matrix(&bytes[..10], StoreKind::TrainFeatures).is_err());
        assert!(decode_matrix(&bytes, StoreKind::QDiag).is_err());
    }

    #[test]
    fn overflow_rejected() {
        let m = DenseMatrix::from_fn(1, 1, |_, _| 1e300);
        assert!(encode_matrix(&m, StoreKind::Scores).is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.trakfs");
        write_matrix(&p, &sample(), StoreKind::Scores).unwrap();
        let names: Vec<_> = fs::read_dir(p.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.trakfs")]);
        assert_eq!(read_matrix(&p, StoreKind::Scores).unwrap(), canonicalize_f32(&sample()));
    }
}
