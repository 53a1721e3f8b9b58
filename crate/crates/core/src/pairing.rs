//! Functions in Legendre-trig coordinates and the inner product between them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{from_sig17, to_sig17, Sig17};
use crate::legendre::eval_legendre_all;
use crate::tables::InnerProductTables;

/// Σ a_k P_k(x) cos(ωx) + b_k P_k(x) sin(ωx).
#[derive(Debug, Clone, PartialEq)]
pub struct LegTrigCoeffs {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LegTrigCoeffs {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidParameter(format!(
                "cosine and sine parts differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("coefficients must be finite".into()));
        }
        Ok(LegTrigCoeffs { a, b })
    }

    pub fn zeros(len: usize) -> Self {
        LegTrigCoeffs {
            a: vec![0.0; len],
            b: vec![0.0; len],
        }
    }

    /// P_degree(x) cos(ωx).
    pub fn cos_term(degree: usize) -> Self {
        let mut c = Self::zeros(degree + 1);
        c.a[degree] = 1.0;
        c
    }

    /// P_degree(x) sin(ωx).
    pub fn sin_term(degree: usize) -> Self {
        let mut c = Self::zeros(degree + 1);
        c.b[degree] = 1.0;
        c
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Zero-pad (never truncates).
    pub fn padded(&self, len: usize) -> Self {
        let mut c = self.clone();
        if len > c.len() {
            c.a.resize(len, 0.0);
            c.b.resize(len, 0.0);
        }
        c
    }

    pub fn scaled(&self, s: f64) -> Self {
        LegTrigCoeffs {
            a: self.a.iter().map(|v| v * s).collect(),
            b: self.b.iter().map(|v| v * s).collect(),
        }
    }

    /// self += s · other, growing self if other is longer.
    pub fn add_scaled(&mut self, s: f64, other: &LegTrigCoeffs) {
        if other.len() > self.len() {
            self.a.resize(other.len(), 0.0);
            self.b.resize(other.len(), 0.0);
        }
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += s * y;
        }
        for (x, y) in self.b.iter_mut().zip(&other.b) {
            *x += s * y;
        }
    }

    /// Coefficients of x·f, using x P_j = ((j+1) P_{j+1} + j P_{j-1}) / (2j+1).
    /// The result is one longer.
    pub fn times_x(&self) -> Self {
        fn shift(c: &[f64]) -> Vec<f64> {
            let mut out = vec![0.0; c.len() + 1];
            for (j, &v) in c.iter().enumerate() {
                let d = (2 * j + 1) as f64;
                out[j + 1] += (j + 1) as f64 / d * v;
                if j > 0 {
                    out[j - 1] += j as f64 / d * v;
                }
            }
            out
        }
        LegTrigCoeffs {
            a: shift(&self.a),
            b: shift(&self.b),
        }
    }

    /// Interleaved (a₀, b₀, a₁, b₁, ...).
    pub fn interleaved(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).flat_map(|(a, b)| [*a, *b]).collect()
    }

    pub fn from_interleaved(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "interleaved vector has odd length {}",
                v.len()
            )));
        }
        let a = v.iter().step_by(2).copied().collect();
        let b = v.iter().skip(1).step_by(2).copied().collect();
        Self::new(a, b)
    }

    /// Point value at x for frequency ω.
    pub fn eval(&self, omega: f64, x: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let p = eval_legendre_all(self.len() - 1, x);
        self.eval_with(&p, (omega * x).sin_cos())
    }

    /// Point value given precomputed P_j(x) and (sin ωx, cos ωx).
    pub fn eval_with(&self, legendre: &[f64], (s, c): (f64, f64)) -> f64 {
        let mut ca = 0.0;
        let mut sb = 0.0;
        for j in 0..self.len() {
            ca += self.a[j] * legendre[j];
            sb += self.b[j] * legendre[j];
        }
        ca * c + sb * s
    }

    pub fn max_abs_diff(&self, other: &LegTrigCoeffs) -> f64 {
        let n = self.len().max(other.len());
        let (x, y) = (self.padded(n), other.padded(n));
        x.a.iter()
            .zip(&y.a)
            .chain(x.b.iter().zip(&y.b))
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }
}

/// JSON form `{ "a": [...], "b": [...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffsDocument {
    pub a: Vec<Sig17>,
    pub b: Vec<Sig17>,
}

impl From<&LegTrigCoeffs> for CoeffsDocument {
    fn from(c: &LegTrigCoeffs) -> Self {
        CoeffsDocument {
            a: to_sig17(&c.a),
            b: to_sig17(&c.b),
        }
    }
}

impl TryFrom<&CoeffsDocument> for LegTrigCoeffs {
    type Error = Error;

    fn try_from(d: &CoeffsDocument) -> Result<Self> {
        LegTrigCoeffs::new(from_sig17(&d.a), from_sig17(&d.b))
    }
}

fn check_fits(f: &LegTrigCoeffs, tables: &InnerProductTables) -> Result<()> {
    if f.len() > tables.size() {
        return Err(Error::DimensionOverflow {
            required: f.len() - 1,
            available: tables.n_max,
        });
    }
    Ok(())
}

/// ⟨f, g⟩ = aᵀ M2 d + aᵀ M3 c + bᵀ M2 c + bᵀ M4 d, where (a, b) are the
/// coefficients of f and (c, d) those of g. The b–c term uses M2 as is,
/// which relies on M2 being symmetric.
pub fn inner_product(f: &LegTrigCoeffs, g: &LegTrigCoeffs, tables: &InnerProductTables) -> Result<f64> {
    check_fits(f, tables)?;
    check_fits(g, tables)?;
    let (m2, m3, m4) = (&tables.m2, &tables.m3, &tables.m4);
    let mut sum = 0.0;
    for j in 0..f.len() {
        let (aj, bj) = (f.a[j], f.b[j]);
        if aj == 0.0 && bj == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for k in 0..g.len() {
            let (ck, dk) = (g.a[k], g.b[k]);
            row += aj * (m2[(j, k)] * dk + m3[(j, k)] * ck) + bj * (m2[(j, k)] * ck + m4[(j, k)] * dk);
        }
        sum += row;
    }
    Ok(sum)
}

/// G[i][j] = ⟨rows[i], rows[j]⟩; symmetric by construction.
pub fn gram_matrix(rows: &[LegTrigCoeffs], tables: &InnerProductTables) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = inner_product(&rows[i], &rows[j], tables)?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Self inner products down to this are rounding noise and clip to 0.
pub const NEGATIVE_NORM_TOL: f64 = 1e-12;

pub fn norm(f: &LegTrigCoeffs, tables: &InnerProductTables) -> Result<f64> {
    let ip = inner_product(f, f, tables)?;
    if ip < -NEGATIVE_NORM_TOL {
        return Err(Error::Corrupt(format!("negative self inner product {ip:e}")));
    }
    Ok(ip.max(0.0).sqrt())
}
