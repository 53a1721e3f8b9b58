//! Inner-product tables between Legendre-trig functions at one frequency.
//!
//! For 0 ≤ j, k ≤ N:
//!
//! ```text
//! m1[j][k] = ⟨P_j, P_k⟩
//! m2[j][k] = ⟨P_j cos(ωx), P_k sin(ωx)⟩
//! m3[j][k] = ⟨P_j cos(ωx), P_k cos(ωx)⟩
//! m4[j][k] = ⟨P_j sin(ωx), P_k sin(ωx)⟩
//! m5[j][k] = ⟨P_j, P_k cos(2ωx)⟩
//! m6[j][k] = ⟨P_j, P_k sin(2ωx)⟩
//! ```
//!
//! m5 and m6 come from a coupled recursion obtained by integrating by parts
//! once, filled skew diagonal by skew diagonal (j + k = 0, 1, 2, ...). The
//! rest follow from m2 = m6/2, m3 = (m1 + m5)/2 and m4 = (m1 - m5)/2.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::{Frequency, StabilityWarning};
use crate::io::{self, matrix_from_rows, matrix_to_rows, Sig17, SCHEMA_VERSION};
use crate::legendre::{derivative_targets, legendre_norm_sq};
use crate::oracle::{oracle_matrix, OracleConfig, TableKind};

#[derive(Debug, Clone, PartialEq)]
pub struct InnerProductTables {
    pub freq: Frequency,
    pub n_max: usize,
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub m3: DMatrix<f64>,
    pub m4: DMatrix<f64>,
    pub m5: DMatrix<f64>,
    pub m6: DMatrix<f64>,
    pub stability_warning: Option<StabilityWarning>,
}

/// Build all six tables for degrees 0..=n_max.
pub fn build_tables(freq: Frequency, n_max: usize) -> Result<InnerProductTables> {
    let omega = freq.omega();
    if !omega.is_finite() || omega <= 0.0 {
        return Err(Error::InvalidParameter(format!("omega must be positive and finite, got {omega}")));
    }
    let stability_warning = freq.stability_check(n_max);

    let n = n_max + 1;
    let sin2 = freq.sin_2omega();
    let cos2 = freq.cos_2omega();
    let inv_2w = 1.0 / (2.0 * omega);
    let mut m5 = DMatrix::<f64>::zeros(n, n);
    let mut m6 = DMatrix::<f64>::zeros(n, n);

    for diag in 0..=2 * n_max {
        let j_lo = diag.saturating_sub(n_max);
        for j in j_lo..=diag / 2 {
            let k = diag - j;
            let even = diag % 2 == 0;
            // boundary terms of the integration by parts
            let mut c5 = if even { 2.0 * sin2 * inv_2w } else { 0.0 };
            let mut c6 = if even { 0.0 } else { -2.0 * cos2 * inv_2w };
            for m in derivative_targets(j) {
                let w = (2 * m + 1) as f64;
                c5 -= inv_2w * w * m6[(m, k)];
                c6 += inv_2w * w * m5[(m, k)];
            }
            for m in derivative_targets(k) {
                let w = (2 * m + 1) as f64;
                c5 -= inv_2w * w * m6[(j, m)];
                c6 += inv_2w * w * m5[(j, m)];
            }
            m5[(j, k)] = c5;
            m5[(k, j)] = c5;
            m6[(j, k)] = c6;
            m6[(k, j)] = c6;
        }
    }

    let m1 = DMatrix::from_fn(n, n, |j, k| if j == k { legendre_norm_sq(j) } else { 0.0 });
    let m2 = m6.map(|v| v / 2.0);
    let m3 = DMatrix::from_fn(n, n, |j, k| (m1[(j, k)] + m5[(j, k)]) / 2.0);
    let m4 = DMatrix::from_fn(n, n, |j, k| (m1[(j, k)] - m5[(j, k)]) / 2.0);

    Ok(InnerProductTables {
        freq,
        n_max,
        m1,
        m2,
        m3,
        m4,
        m5,
        m6,
        stability_warning,
    })
}

impl InnerProductTables {
    pub fn get(&self, kind: TableKind) -> &DMatrix<f64> {
        match kind {
            TableKind::M1 => &self.m1,
            TableKind::M2 => &self.m2,
            TableKind::M3 => &self.m3,
            TableKind::M4 => &self.m4,
            TableKind::M5 => &self.m5,
            TableKind::M6 => &self.m6,
        }
    }

    pub fn get_mut(&mut self, kind: TableKind) -> &mut DMatrix<f64> {
        match kind {
            TableKind::M1 => &mut self.m1,
            TableKind::M2 => &mut self.m2,
            TableKind::M3 => &mut self.m3,
            TableKind::M4 => &mut self.m4,
            TableKind::M5 => &mut self.m5,
            TableKind::M6 => &mut self.m6,
        }
    }

    pub fn size(&self) -> usize {
        self.n_max + 1
    }

    pub fn to_document(&self) -> TablesDocument {
        TablesDocument {
            schema_version: SCHEMA_VERSION,
            omega: Sig17(self.freq.omega()),
            k: self.freq.k(),
            epsilon: Sig17(self.freq.epsilon()),
            n_max: self.n_max,
            m1: matrix_to_rows(&self.m1),
            m2: matrix_to_rows(&self.m2),
            m3: matrix_to_rows(&self.m3),
            m4: matrix_to_rows(&self.m4),
            m5: matrix_to_rows(&self.m5),
            m6: matrix_to_rows(&self.m6),
        }
    }

    pub fn from_document(doc: &TablesDocument) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let freq = Frequency::from_stored(doc.omega.0, doc.k, doc.epsilon.0)?;
        let n = doc.n_max + 1;
        let load = |rows: &[Vec<Sig17>], name: &str| -> Result<DMatrix<f64>> {
            let m = matrix_from_rows(rows, name)?;
            if m.shape() != (n, n) {
                return Err(Error::Parse(format!(
                    "{name} has shape {:?}, expected {n}x{n}",
                    m.shape()
                )));
            }
            Ok(m)
        };
        Ok(InnerProductTables {
            freq,
            n_max: doc.n_max,
            m1: load(&doc.m1, "m1")?,
            m2: load(&doc.m2, "m2")?,
            m3: load(&doc.m3, "m3")?,
            m4: load(&doc.m4, "m4")?,
            m5: load(&doc.m5, "m5")?,
            m6: load(&doc.m6, "m6")?,
            stability_warning: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_document())?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }

    /// One CSV per table: `<dir>/m1.csv` ... `<dir>/m6.csv`. Returns the paths written.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for kind in TableKind::ALL {
            let path = dir.join(format!("{}.csv", kind.name()));
            io::write_file(&path, &io::matrix_to_csv(self.get(kind)))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// JSON layout of [`InnerProductTables`]; matrices are row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TablesDocument {
    pub schema_version: u32,
    pub omega: Sig17,
    pub k: u64,
    pub epsilon: Sig17,
    pub n_max: usize,
    pub m1: Vec<Vec<Sig17>>,
    pub m2: Vec<Vec<Sig17>>,
    pub m3: Vec<Vec<Sig17>>,
    pub m4: Vec<Vec<Sig17>>,
    pub m5: Vec<Vec<Sig17>>,
    pub m6: Vec<Vec<Sig17>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlaggedEntry {
    pub j: usize,
    pub k: usize,
    pub value: f64,
    pub oracle: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixDeviation {
    pub max_abs_deviation: f64,
    pub worst_entry: (usize, usize),
    pub flagged: Vec<FlaggedEntry>,
}

impl MatrixDeviation {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Per-table comparison of m2..m6 against brute-force quadrature.
#[derive(Debug, Clone, Serialize)]
pub struct TableReport {
    pub omega: f64,
    pub n_max: usize,
    pub tolerance: f64,
    pub matrices: BTreeMap<String, MatrixDeviation>,
}

impl TableReport {
    pub fn passed(&self) -> bool {
        self.matrices.values().all(MatrixDeviation::passed)
    }

    pub fn max_deviation(&self) -> f64 {
        self.matrices
            .values()
            .map(|m| m.max_abs_deviation)
            .fold(0.0, f64::max)
    }

    pub fn flagged_tables(&self) -> Vec<&str> {
        self.matrices
            .iter()
            .filter(|(_, m)| !m.passed())
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

pub fn verify_tables(
    tables: &InnerProductTables,
    oracle_tolerance: f64,
    cfg: &OracleConfig,
) -> Result<TableReport> {
    let mut matrices = BTreeMap::new();
    for kind in &TableKind::ALL[1..] {
        let reference = oracle_matrix(*kind, tables.n_max, &tables.freq, cfg)?;
        let values = tables.get(*kind);
        let mut dev = MatrixDeviation {
            max_abs_deviation: 0.0,
            worst_entry: (0, 0),
            flagged: Vec::new(),
        };
        for j in 0..tables.size() {
            for k in 0..tables.size() {
                let d = (values[(j, k)] - reference[(j, k)]).abs();
                // NaN must never pass
                let d = if d.is_nan() { f64::INFINITY } else { d };
                if d > dev.max_abs_deviation {
                    dev.max_abs_deviation = d;
                    dev.worst_entry = (j, k);
                }
                if d > oracle_tolerance {
                    dev.flagged.push(FlaggedEntry {
                        j,
                        k,
                        value: values[(j, k)],
                        oracle: reference[(j, k)],
                        deviation: d,
                    });
                }
            }
        }
        matrices.insert(kind.name().to_string(), dev);
    }
    Ok(TableReport {
        omega: tables.freq.omega(),
        n_max: tables.n_max,
        tolerance: oracle_tolerance,
        matrices,
    })
}
