//! Approximating F(x) = f(x) sin(ω x) + g(x) cos(ω x) in the orthonormal basis.
//!
//! Targets are given by their envelopes. A raw frequency is first reduced to
//! the nearest 2πk, folding the offset ε into the envelopes:
//!
//! ```text
//! f̂(x) = f(x) cos(εx) − g(x) sin(εx),   ĝ(x) = f(x) sin(εx) + g(x) cos(εx)
//! ```
//!
//! so that f̂ sin(2πk x) + ĝ cos(2πk x) = F(x). Coefficients are inner
//! products with the orthonormal rows, computed by the quadrature oracle.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, OscBasis};
use crate::error::{Error, Result};
use crate::frequency::Frequency;
use crate::io::{from_sig17, to_sig17, Sig17, SCHEMA_VERSION};
use crate::oracle::{CompositeRule, OracleConfig};
use crate::tables::build_tables;

pub type Envelope = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative distance to the basis frequency tolerated by [`project`].
pub const FREQUENCY_MATCH_TOL: f64 = 1e-12;

#[derive(Clone)]
pub struct OscTarget {
    /// Envelope of the sine part.
    pub f_env: Envelope,
    /// Envelope of the cosine part.
    pub g_env: Envelope,
    pub freq_raw: f64,
}

impl fmt::Debug for OscTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OscTarget").field("freq_raw", &self.freq_raw).finish_non_exhaustive()
    }
}

impl OscTarget {
    pub fn new(
        f_env: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_env: impl Fn(f64) -> f64 + Send + Sync + 'static,
        freq_raw: f64,
    ) -> Result<Self> {
        if !freq_raw.is_finite() || freq_raw <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "target frequency must be positive and finite, got {freq_raw}"
            )));
        }
        Ok(OscTarget {
            f_env: Arc::new(f_env),
            g_env: Arc::new(g_env),
            freq_raw,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (s, c) = (self.freq_raw * x).sin_cos();
        (self.f_env)(x) * s + (self.g_env)(x) * c
    }
}

/// Returns the decomposition ω_raw = 2πk + ε and the target rewritten at 2πk.
/// A frequency already within 1e−12 (relative) of 2πk is passed through.
pub fn reduce_frequency(target: &OscTarget) -> Result<(Frequency, OscTarget)> {
    if target.freq_raw <= PI {
        return Err(Error::InvalidParameter(format!(
            "omega = {} <= pi has no reduction with k >= 1",
            target.freq_raw
        )));
    }
    let freq = Frequency::new(target.freq_raw)?;
    if freq.is_exact_multiple() {
        return Ok((freq, target.clone()));
    }
    let eps = freq.epsilon();
    let (f, g) = (target.f_env.clone(), target.g_env.clone());
    let (f2, g2) = (f.clone(), g.clone());
    let reduced = OscTarget {
        f_env: Arc::new(move |x| {
            let (s, c) = (eps * x).sin_cos();
            f(x) * c - g(x) * s
        }),
        g_env: Arc::new(move |x| {
            let (s, c) = (eps * x).sin_cos();
            f2(x) * s + g2(x) * c
        }),
        freq_raw: TAU * freq.k() as f64,
    };
    Ok((freq, reduced))
}

/// Coefficients of a target in a specific basis, rows ordered p₀, q₀, p₁, q₁, ...
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub basis_hash: String,
    pub freq: Frequency,
    pub n_max: usize,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionDocument {
    pub schema_version: u32,
    pub omega: Sig17,
    pub k: u64,
    pub epsilon: Sig17,
    pub n_max: usize,
    pub basis_hash: String,
    pub coeffs: Vec<Sig17>,
}

impl Expansion {
    pub fn zeros(basis: &OscBasis) -> Self {
        Expansion {
            basis_hash: basis.content_hash(),
            freq: basis.freq,
            n_max: basis.n_max,
            coeffs: vec![0.0; basis.dim()],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.coeffs.len() != 2 * (self.n_max + 1) {
            return Err(Error::Parse(format!(
                "expansion with n_max = {} needs {} coefficients, found {}",
                self.n_max,
                2 * (self.n_max + 1),
                self.coeffs.len()
            )));
        }
        if let Some(v) = self.coeffs.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("non-finite coefficient {v}")));
        }
        Ok(())
    }

    /// Fails unless `basis` is the one these coefficients were computed in.
    pub fn check_basis(&self, basis: &OscBasis) -> Result<()> {
        let hash = basis.content_hash();
        if hash != self.basis_hash || basis.n_max != self.n_max {
            return Err(Error::BasisMismatch {
                expected: format!("{} (n_max = {})", self.basis_hash, self.n_max),
                actual: format!("{hash} (n_max = {})", basis.n_max),
            });
        }
        Ok(())
    }

    pub fn to_document(&self) -> ExpansionDocument {
        ExpansionDocument {
            schema_version: SCHEMA_VERSION,
            omega: Sig17(self.freq.omega()),
            k: self.freq.k(),
            epsilon: Sig17(self.freq.epsilon()),
            n_max: self.n_max,
            basis_hash: self.basis_hash.clone(),
            coeffs: to_sig17(&self.coeffs),
        }
    }

    pub fn from_document(doc: &ExpansionDocument) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let e = Expansion {
            basis_hash: doc.basis_hash.clone(),
            freq: Frequency::from_stored(doc.omega.0, doc.k, doc.epsilon.0)?,
            n_max: doc.n_max,
            coeffs: from_sig17(&doc.coeffs),
        };
        e.validate()?;
        Ok(e)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_document())?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

fn check_frequency(target: &OscTarget, basis: &OscBasis) -> Result<()> {
    let w = basis.freq.omega();
    if (target.freq_raw - w).abs() > FREQUENCY_MATCH_TOL * w {
        return Err(Error::FrequencyMismatch {
            expected: w,
            actual: target.freq_raw,
        });
    }
    Ok(())
}

/// cᵢ = ⟨F, rowᵢ⟩ by oracle quadrature.
pub fn project(target: &OscTarget, basis: &OscBasis, cfg: &OracleConfig) -> Result<Expansion> {
    check_frequency(target, basis)?;
    let rule = CompositeRule::for_frequency(&basis.freq, cfg)?;
    let mut coeffs = vec![0.0; basis.dim()];
    let mut vals = vec![0.0; basis.dim()];
    let mut leg = Vec::new();
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let fx = target.eval(x);
        if !fx.is_finite() {
            return Err(Error::NonFinite { x });
        }
        basis.evaluate_all(x, &mut leg, &mut vals);
        for (c, v) in coeffs.iter_mut().zip(&vals) {
            *c += w * fx * v;
        }
    }
    Ok(Expansion {
        basis_hash: basis.content_hash(),
        freq: basis.freq,
        n_max: basis.n_max,
        coeffs,
    })
}

pub fn evaluate_expansion(exp: &Expansion, basis: &OscBasis, x: f64) -> Result<f64> {
    exp.check_basis(basis)?;
    let mut vals = vec![0.0; basis.dim()];
    basis.evaluate_all(x, &mut Vec::new(), &mut vals);
    Ok(exp.coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum())
}

/// ‖F − Σ cᵢ rowᵢ‖ by oracle quadrature.
pub fn residual_norm(
    target: &OscTarget,
    exp: &Expansion,
    basis: &OscBasis,
    cfg: &OracleConfig,
) -> Result<f64> {
    check_frequency(target, basis)?;
    exp.check_basis(basis)?;
    let rule = CompositeRule::for_frequency(&basis.freq, cfg)?;
    let mut vals = vec![0.0; basis.dim()];
    let mut leg = Vec::new();
    let mut sum = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        basis.evaluate_all(x, &mut leg, &mut vals);
        let approx: f64 = exp.coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum();
        let r = target.eval(x) - approx;
        if !r.is_finite() {
            return Err(Error::NonFinite { x });
        }
        sum += w * r * r;
    }
    Ok(sum.max(0.0).sqrt())
}

/// Residual after truncating at each degree, and the first degree that met the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeSearch {
    pub degree: Option<usize>,
    /// residuals[n] is the residual using degrees 0..=n.
    pub residuals: Vec<f64>,
}

/// Smallest N at which the N-degree orthonormal basis reaches `tol`.
///
/// The target is reduced first. Bases of different degree share their
/// leading rows, so one basis of degree `n_cap` covers every N.
pub fn smallest_osc_degree(
    target: &OscTarget,
    tol: f64,
    n_cap: usize,
    cfg: &OracleConfig,
) -> Result<DegreeSearch> {
    let (freq, reduced) = reduce_frequency(target)?;
    let base = Frequency::two_pi_multiple(freq.k())?;
    let tables = build_tables(base, n_cap + 1)?;
    let basis = build_basis(base, n_cap, &tables, false)?;
    let exp = project(&reduced, &basis, cfg)?;
    let rule = CompositeRule::for_frequency(&base, cfg)?;

    let dim = basis.dim();
    let mut values = vec![0.0; rule.len() * dim];
    let mut resid: Vec<f64> = Vec::with_capacity(rule.len());
    let mut leg = Vec::new();
    for (i, &x) in rule.nodes.iter().enumerate() {
        basis.evaluate_all(x, &mut leg, &mut values[i * dim..(i + 1) * dim]);
        resid.push(reduced.eval(x));
    }
    let mut residuals = Vec::with_capacity(n_cap + 1);
    for n in 0..=n_cap {
        let mut sum = 0.0;
        for (i, (r, &w)) in resid.iter_mut().zip(&rule.weights).enumerate() {
            let row = &values[i * dim..];
            *r -= exp.coeffs[2 * n] * row[2 * n] + exp.coeffs[2 * n + 1] * row[2 * n + 1];
            sum += w * *r * *r;
        }
        let res = sum.max(0.0).sqrt();
        residuals.push(res);
        if res <= tol {
            return Ok(DegreeSearch {
                degree: Some(n),
                residuals,
            });
        }
    }
    Ok(DegreeSearch {
        degree: None,
        residuals,
    })
}

/// Smallest N at which a plain Legendre expansion Σ_{j≤N} c_j P_j of the
/// unreduced target reaches `tol`.
///
/// P_j is advanced over all quadrature nodes at once, so memory stays at a few
/// node-length vectors whatever the degree. The panel count accounts for both
/// ω and the oscillation of P_{n_cap}.
pub fn smallest_legendre_degree(
    target: &OscTarget,
    tol: f64,
    n_cap: usize,
    cfg: &OracleConfig,
) -> Result<DegreeSearch> {
    let rule = CompositeRule::new(target.freq_raw + n_cap as f64, cfg)?;
    let mut resid = Vec::with_capacity(rule.len());
    for &x in &rule.nodes {
        let v = target.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x });
        }
        resid.push(v);
    }
    let mut prev = vec![0.0; rule.len()];
    let mut cur = vec![1.0; rule.len()];
    let mut residuals = Vec::with_capacity(n_cap + 1);
    for n in 0..=n_cap {
        if n > 0 {
            // P_n = ((2n−1) x P_{n−1} − (n−1) P_{n−2}) / n
            let a = (2 * n - 1) as f64 / n as f64;
            let b = (n - 1) as f64 / n as f64;
            for ((p, c), &x) in prev.iter_mut().zip(cur.iter_mut()).zip(&rule.nodes) {
                let next = a * x * *c - b * *p;
                *p = *c;
                *c = next;
            }
        }
        let mut dot = 0.0;
        for ((r, c), &w) in resid.iter().zip(&cur).zip(&rule.weights) {
            dot += w * r * c;
        }
        let coeff = dot * (2 * n + 1) as f64 / 2.0;
        let mut sum = 0.0;
        for ((r, c), &w) in resid.iter_mut().zip(&cur).zip(&rule.weights) {
            *r -= coeff * c;
            sum += w * *r * *r;
        }
        let res = sum.max(0.0).sqrt();
        residuals.push(res);
        if res <= tol {
            return Ok(DegreeSearch {
                degree: Some(n),
                residuals,
            });
        }
    }
    Ok(DegreeSearch {
        degree: None,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::build_tables;
    use proptest::prelude::*;

    fn basis(k: u64, n: usize) -> OscBasis {
        let f = Frequency::two_pi_multiple(k).unwrap();
        let t = build_tables(f, n + 1).unwrap();
        build_basis(f, n, &t, false).unwrap()
    }

    fn grid() -> impl Iterator<Item = f64> {
        (0..=100).map(|i| -1.0 + 0.02 * i as f64)
    }

    #[test]
    fn exact_multiple_passes_through() {
        let t = OscTarget::new(|x| x, |_| 1.0, TAU * 7.0).unwrap();
        let (freq, r) = reduce_frequency(&t).unwrap();
        assert!(freq.is_exact_multiple());
        assert_eq!(freq.k(), 7);
        assert_eq!(freq.epsilon(), 0.0);
        assert_eq!(r.freq_raw, t.freq_raw);
        assert!(Arc::ptr_eq(&r.f_env, &t.f_env));
    }

    #[test]
    fn reduction_decomposition() {
        let t = OscTarget::new(|_| 1.0, |_| 0.0, TAU * 10.0 - 0.25).unwrap();
        let (freq, r) = reduce_frequency(&t).unwrap();
        assert_eq!(freq.k(), 10);
        assert!((freq.epsilon() + 0.25).abs() < 1e-13);
        assert_eq!(r.freq_raw, TAU * 10.0);
    }

    #[test]
    fn reduction_preserves_values() {
        let t = OscTarget::new(|_| 1.0, |_| 0.0, TAU * 3.0 + 0.5).unwrap();
        let (_, r) = reduce_frequency(&t).unwrap();
        assert!((r.eval(0.2) - t.eval(0.2)).abs() <= 1e-13);
    }

    #[test]
    fn low_frequency_rejected() {
        let t = OscTarget::new(|_| 1.0, |_| 0.0, PI).unwrap();
        assert!(reduce_frequency(&t).is_err());
        assert!(OscTarget::new(|_| 1.0, |_| 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn reduction_is_pointwise_identity(k in 1u64..200, frac in -0.49f64..0.49, c0 in -2.0f64..2.0, c1 in -2.0f64..2.0) {
            let t = OscTarget::new(move |x| c0 + x, move |x| c1 * x * x, TAU * (k as f64 + frac)).unwrap();
            let (_, r) = reduce_frequency(&t).unwrap();
            for x in grid() {
                prop_assert!((r.eval(x) - t.eval(x)).abs() <= 1e-13 * (1.0 + t.freq_raw.abs() * 1e-2));
            }
        }
    }

    #[test]
    fn cosine_projects_to_first_row() {
        let b = basis(20, 4);
        let w = b.freq.omega();
        let t = OscTarget::new(|_| 0.0, |_| 1.0, w).unwrap();
        let e = project(&t, &b, &OracleConfig::default()).unwrap();
        assert!((e.coeffs[0] - 1.0).abs() < 1e-12);
        assert!(e.coeffs[1..].iter().all(|c| c.abs() < 1e-12));
        let v = evaluate_expansion(&e, &b, 0.37).unwrap();
        assert!((v - (0.37 * w).cos()).abs() < 1e-9);
    }

    #[test]
    fn zero_target() {
        let b = basis(20, 3);
        let cfg = OracleConfig::default();
        let t = OscTarget::new(|_| 0.0, |_| 0.0, b.freq.omega()).unwrap();
        let e = project(&t, &b, &cfg).unwrap();
        assert!(e.coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(residual_norm(&t, &e, &b, &cfg).unwrap(), 0.0);
        assert_eq!(evaluate_expansion(&Expansion::zeros(&b), &b, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn unit_vector_evaluates_p0() {
        let b = basis(6, 2);
        let mut e = Expansion::zeros(&b);
        e.coeffs[0] = 1.0;
        assert!((evaluate_expansion(&e, &b, 0.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn in_span_targets_have_tiny_residual() {
        let cfg = OracleConfig::default();
        let b = basis(20, 3);
        let w = b.freq.omega();
        for t in [
            OscTarget::new(|_| 0.0, |x| x, w).unwrap(),
            OscTarget::new(|_| 1.0, |_| 0.0, w).unwrap(),
            OscTarget::new(|x| 1.0 - 3.0 * x * x * x, |x| 0.5 * x * x, w).unwrap(),
        ] {
            let e = project(&t, &b, &cfg).unwrap();
            assert!(residual_norm(&t, &e, &b, &cfg).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn smooth_envelope_converges() {
        let cfg = OracleConfig::default();
        let b = basis(20, 12);
        let t = OscTarget::new(f64::exp, |_| 0.0, b.freq.omega()).unwrap();
        let e = project(&t, &b, &cfg).unwrap();
        assert!(residual_norm(&t, &e, &b, &cfg).unwrap() <= 1e-8);
    }

    #[test]
    fn parseval() {
        let cfg = OracleConfig::default();
        let b = basis(20, 6);
        let w = b.freq.omega();
        let rule = CompositeRule::for_frequency(&b.freq, &cfg).unwrap();
        let runge = OscTarget::new(|x| 1.0 / (1.0 + 25.0 * x * x), |x| x.cos(), w).unwrap();
        let inspan = OscTarget::new(|x| x * x, |x| 2.0 - x, w).unwrap();
        for (t, in_span) in [(runge, false), (inspan, true)] {
            let e = project(&t, &b, &cfg).unwrap();
            let energy: f64 = e.coeffs.iter().map(|c| c * c).sum();
            let ff = rule.integrate(|x| t.eval(x) * t.eval(x)).unwrap();
            assert!(energy <= ff + 1e-9);
            if in_span {
                assert!((energy - ff).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn reduced_round_trip_reproduces_original() {
        let cfg = OracleConfig::default();
        let t = OscTarget::new(f64::exp, |_| 1.0, TAU * 20.0 + 0.3).unwrap();
        let (freq, r) = reduce_frequency(&t).unwrap();
        let b = basis(freq.k(), 16);
        let e = project(&r, &b, &cfg).unwrap();
        for x in grid() {
            assert!((evaluate_expansion(&e, &b, x).unwrap() - t.eval(x)).abs() <= 1e-8, "x = {x}");
        }
    }

    #[test]
    fn mismatches_rejected() {
        let cfg = OracleConfig::default();
        let b = basis(20, 3);
        let other = basis(21, 3);
        let t = OscTarget::new(|_| 1.0, |_| 0.0, other.freq.omega()).unwrap();
        assert!(matches!(project(&t, &b, &cfg), Err(Error::FrequencyMismatch { .. })));
        let e = project(&t, &other, &cfg).unwrap();
        assert!(matches!(evaluate_expansion(&e, &b, 0.0), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn expansion_json_round_trip() {
        let cfg = OracleConfig::default();
        let b = basis(5, 4);
        let t = OscTarget::new(|x| x.exp(), |x| 1.0 / (1.0 + 25.0 * x * x), b.freq.omega()).unwrap();
        let e = project(&t, &b, &cfg).unwrap();
        let back = Expansion::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(back, e);
        let mut doc = e.to_document();
        doc.coeffs.pop();
        assert!(Expansion::from_document(&doc).is_err());
    }

    #[test]
    fn degree_searches() {
        let cfg = OracleConfig::default();
        let t = OscTarget::new(f64::exp, |_| 1.0, TAU * 20.0).unwrap();
        let osc = smallest_osc_degree(&t, 1e-6, 30, &cfg).unwrap();
        let n = osc.degree.unwrap();
        assert!(n > 2 && n < 15, "{n}");
        assert!(osc.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let leg = smallest_legendre_degree(&t, 1e-6, 400, &cfg).unwrap();
        let m = leg.degree.unwrap();
        assert!(m as f64 > t.freq_raw, "{m}");
    }
}
