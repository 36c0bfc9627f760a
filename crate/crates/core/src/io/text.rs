// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dataset text format.
//!
//! ```text
//! d,c,n
//! id,label,bias,x_0,...,x_{d-1}     (n rows)
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Numbers are written
//! in Rust's shortest round-trip form, so write then read is lossless.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Dataset, Example};

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse {what} from {s:?}")))
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))?;
    let h: Vec<&str> = header.split(',').collect();
    if h.len() != 3 {
        return Err(Error::Format(format!("line {hl}: header must be d,c,n")));
    }
    let d: usize = parse_field(h[0], "d", hl)?;
    let c: usize = parse_field(h[1], "c", hl)?;
    let n: usize = parse_field(h[2], "n", hl)?;
    let mut examples = Vec::with_capacity(n);
    for (ln, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != d + 3 {
            return Err(Error::Format(format!(
                "line {ln}: expected {} fields, found {}",
                d + 3,
                f.len()
            )));
        }
        let x = f[3..]
            .iter()
            .map(|s| parse_field::<f64>(s, "feature", ln))
            .collect::<Result<Vec<_>>>()?;
        examples.push(
            Example::new(parse_field(f[0], "id", ln)?, x, parse_field(f[1], "label", ln)?)
                .with_bias(parse_field(f[2], "bias", ln)?),
        );
    }
    if examples.len() != n {
        return Err(Error::Format(format!(
            "header says n = {n}, found {} rows",
            examples.len()
        )));
    }
    Dataset::new(examples, c, d)
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut s = format!("{},{},{}\n", data.feature_dim(), data.class_count(), data.len());
    for ex in data.iter() {
        write!(s, "{},{},{}", ex.id, ex.y, ex.bias).expect("write to String");
        for v in &ex.x {
            write!(s, ",{v}").expect("write to String");
        }
        s.push('\n');
    }
    s
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    super::store::atomic_write(path, format_dataset(data).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::synthetic::gaussian_blobs;

    #[test]
    fn round_trip_is_lossless() {
        let data = gaussian_blobs(25, 4, 3, 1.5, 9, 0);
        let back = parse_dataset(&format_dataset(&data)).unwrap();
        assert_eq!(back, data);
        assert_eq!(back.content_hash(), data.content_hash());
    }

    #[test]
    fn parses_comments_and_bias() {
        let d = parse_dataset("# toy\n2,2,2\n\n7,1,0.5,1,2\n8,0,0,-1,3e-2\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.get(0).bias, 0.5);
        assert_eq!(d.get(1).x, vec![-1.0, 0.03]);
    }

    #[test]
    fn malformed_rejected() {
        assert!(parse_dataset("").is_err());
        assert!(parse_dataset("2,2\n").is_err());
        assert!(parse_dataset("2,2,1\n0,0,0,1\n").is_err());
        assert!(parse_dataset("2,2,2\n0,0,0,1,1\n").is_err());
        assert!(parse_dataset("1,2,1\n0,5,0,1\n").is_err());
        assert!(parse_dataset("1,2,1\n0,0,0,abc\n").is_err());
    }
}
