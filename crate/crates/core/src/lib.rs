//! Orthonormal bases of Legendre polynomials multiplied by cos(ωx) and sin(ωx).
//!
//! The crate builds the inner-product tables between Legendre-trig functions
//! with a skew-diagonal recursion, runs the paired three-term recurrence that
//! produces the orthonormal family {p_k, q_k}, and provides derivative
//! matrices, projection of oscillatory targets, and a brute-force quadrature
//! oracle that checks all of it.

pub mod approx;
pub mod basis;
pub mod calculus;
pub mod cli;
pub mod error;
pub mod frequency;
pub mod io;
pub mod legendre;
pub mod oracle;
pub mod pairing;
pub mod tables;

pub use error::{Error, Result};
pub use frequency::{Frequency, StabilityWarning};
pub use legendre::{derivative_expansion, eval_legendre, gauss_legendre_rule, legendre_norm_sq};
pub use oracle::OracleConfig;
pub use pairing::{gram_matrix, inner_product, norm, LegTrigCoeffs};
pub use tables::{build_tables, verify_tables, InnerProductTables};
pub use basis::{build_basis, monic_norm_profile, OscBasis};
pub use calculus::{derivative_matrix_legtrig, to_orthogonal_basis, DerivativeOperator};
pub use approx::{evaluate_expansion, project, reduce_frequency, residual_norm, Expansion, OscTarget};
