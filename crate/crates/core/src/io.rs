//! Number formatting and matrix file helpers shared by every serialized type.
//!
//! All reals are written with 17 significant digits, which round-trips any
//! finite f64 bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::Deserializer;
use serde::ser::{Error as _, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits in scientific notation, e.g. `-1.5915494309189535e-2`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// An f64 that serializes to JSON with exactly 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!("cannot serialize non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(fmt17(self.0)).map_err(S::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Sig17 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Sig17)
    }
}

pub fn to_sig17(values: &[f64]) -> Vec<Sig17> {
    values.iter().copied().map(Sig17).collect()
}

pub fn from_sig17(values: &[Sig17]) -> Vec<f64> {
    values.iter().map(|v| v.0).collect()
}

/// Row-major nested arrays.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<Sig17>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Sig17(m[(i, j)])).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<Sig17>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j].0))
}

/// CSV with a header of column labels `c0,c1,...`, comma separated, LF endings.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt17(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let ncols = if header.is_empty() { 0 } else { header.split(',').count() };
    let mut data = Vec::new();
    let mut nrows = 0;
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != ncols {
            return Err(Error::Parse(format!(
                "CSV line {}: expected {ncols} fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("CSV line {}: bad number {f:?}", lineno + 2)))?;
            data.push(v);
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &data))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
