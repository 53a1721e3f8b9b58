//! Differentiation in Legendre-trig coordinates and in the orthonormal basis.
//!
//! Coefficient vectors are interleaved (a₀, b₀, a₁, b₁, ...) and operators act
//! on the left of column vectors. With
//!
//! ```text
//! (a_j P_j cos + b_j P_j sin)' = a_j (P_j' cos − ω P_j sin) + b_j (P_j' sin + ω P_j cos)
//! ```
//!
//! the matrix D has 2×2 blocks: ω·[[0, 1], [−1, 0]] on the diagonal,
//! (2m+1)·I in block (m, j) whenever m < j and j − m is odd, zero elsewhere.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::OscBasis;
use crate::error::{Error, Result};
use crate::frequency::Frequency;
use crate::io::{matrix_to_rows, Sig17, SCHEMA_VERSION};
use crate::legendre::derivative_targets;
use crate::pairing::LegTrigCoeffs;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeOperator {
    pub freq: Frequency,
    pub n_max: usize,
    pub d_legtrig: DMatrix<f64>,
    /// T⁻¹ D T, where T holds the basis members as columns.
    pub d_orth: Option<DMatrix<f64>>,
}

pub fn derivative_matrix_legtrig(freq: Frequency, n_max: usize) -> DerivativeOperator {
    let dim = 2 * (n_max + 1);
    let omega = freq.omega();
    let mut d = DMatrix::zeros(dim, dim);
    for j in 0..=n_max {
        let (a, b) = (2 * j, 2 * j + 1);
        d[(a, b)] = omega;
        d[(b, a)] = -omega;
        for m in derivative_targets(j) {
            let c = (2 * m + 1) as f64;
            d[(2 * m, a)] = c;
            d[(2 * m + 1, b)] = c;
        }
    }
    DerivativeOperator {
        freq,
        n_max,
        d_legtrig: d,
        d_orth: None,
    }
}

/// T = Bᵀ: column i holds the interleaved Legendre-trig coordinates of member i,
/// so orthonormal-basis coefficients y map to Legendre-trig coefficients T·y.
/// Upper triangular because B is lower triangular.
pub fn coordinate_matrix(basis: &OscBasis) -> DMatrix<f64> {
    basis.representation_matrix().transpose()
}

pub fn to_orthogonal_basis(op: &DerivativeOperator, basis: &OscBasis) -> Result<DerivativeOperator> {
    if !op.freq.matches(&basis.freq, 1e-12) {
        return Err(Error::FrequencyMismatch {
            expected: op.freq.omega(),
            actual: basis.freq.omega(),
        });
    }
    if op.n_max != basis.n_max {
        return Err(Error::InvalidParameter(format!(
            "operator has n_max = {}, basis has n_max = {}",
            op.n_max, basis.n_max
        )));
    }
    let t = coordinate_matrix(basis);
    for i in 0..t.nrows() {
        if t[(i, i)] == 0.0 || !t[(i, i)].is_finite() {
            return Err(Error::Singular(i));
        }
    }
    let dt = &op.d_legtrig * &t;
    let d_orth = t.solve_upper_triangular(&dt).ok_or(Error::Singular(0))?;
    Ok(DerivativeOperator {
        d_orth: Some(d_orth),
        ..op.clone()
    })
}

impl DerivativeOperator {
    pub fn dim(&self) -> usize {
        self.d_legtrig.nrows()
    }

    /// Derivative of a Legendre-trig function, in the same coordinates.
    pub fn apply_legtrig(&self, f: &LegTrigCoeffs) -> Result<LegTrigCoeffs> {
        if f.len() > self.n_max + 1 {
            return Err(Error::DimensionOverflow {
                required: f.len() - 1,
                available: self.n_max,
            });
        }
        let v = nalgebra::DVector::from_vec(f.padded(self.n_max + 1).interleaved());
        LegTrigCoeffs::from_interleaved((&self.d_legtrig * v).as_slice())
    }

    /// Derivative of Σ yᵢ memberᵢ, as coefficients in the same basis.
    pub fn apply_orth(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let d = self
            .d_orth
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("operator has no orthogonal-basis form".into()))?;
        if coeffs.len() != d.ncols() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                d.ncols(),
                coeffs.len()
            )));
        }
        let v = nalgebra::DVector::from_column_slice(coeffs);
        Ok((d * v).as_slice().to_vec())
    }

    /// max |T·d_orth − D·T|.
    pub fn similarity_residual(&self, basis: &OscBasis) -> Result<f64> {
        let d = self
            .d_orth
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("operator has no orthogonal-basis form".into()))?;
        let t = coordinate_matrix(basis);
        Ok((&t * d - &self.d_legtrig * &t).abs().max())
    }

    pub fn to_document(&self) -> DerivativeDocument {
        DerivativeDocument {
            schema_version: SCHEMA_VERSION,
            omega: Sig17(self.freq.omega()),
            k: self.freq.k(),
            epsilon: Sig17(self.freq.epsilon()),
            n_max: self.n_max,
            d_legtrig: matrix_to_rows(&self.d_legtrig),
            d_orth: self.d_orth.as_ref().map(matrix_to_rows),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_document())?;
        s.push('\n');
        Ok(s)
    }

    pub fn d_legtrig_csv(&self) -> String {
        crate::io::matrix_to_csv(&self.d_legtrig)
    }

    pub fn d_orth_csv(&self) -> Option<String> {
        self.d_orth.as_ref().map(crate::io::matrix_to_csv)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeDocument {
    pub schema_version: u32,
    pub omega: Sig17,
    pub k: u64,
    pub epsilon: Sig17,
    pub n_max: usize,
    pub d_legtrig: Vec<Vec<Sig17>>,
    pub d_orth: Option<Vec<Vec<Sig17>>>,
}
