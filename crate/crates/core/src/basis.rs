//! The paired orthonormal family {p_k, q_k}.
//!
//! Starting from p₀ = cos(ωx) and q₀ = sin(ωx), each new pair comes from the
//! mixed three-term recurrence
//!
//! ```text
//! p̃_{k+1} = x p_k − α_k q_k − β_k p_{k−1},   α_k = ⟨x p_k, q_k⟩/⟨q_k, q_k⟩,  β_k = ⟨x p_k, p_{k−1}⟩/⟨p_{k−1}, p_{k−1}⟩
//! q̃_{k+1} = x q_k − γ_k p_k − δ_k q_{k−1},   γ_k = ⟨x q_k, p_k⟩/⟨p_k, p_k⟩,  δ_k = ⟨x q_k, q_{k−1}⟩/⟨q_{k−1}, q_{k−1}⟩
//! ```
//!
//! followed by normalization. p_k has the parity of k and q_k the opposite
//! parity, which is why only one member of the other family appears. All
//! inner products go through the tables, so rows stay in Legendre-trig
//! coordinates throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::{Frequency, StabilityWarning};
use crate::io::{from_sig17, to_sig17, Sig17, SCHEMA_VERSION};
use crate::legendre::eval_legendre_all_into;
use crate::pairing::{inner_product, CoeffsDocument, LegTrigCoeffs};
use crate::tables::InnerProductTables;

/// Pre-normalization norms below this mean the basis has degenerated.
pub const DEGENERATION_TOL: f64 = 1e-13;

/// Recurrence coefficients at step k (the ones that produce row k+1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceStep {
    pub alpha: Sig17,
    pub beta: Sig17,
    pub gamma: Sig17,
    pub delta: Sig17,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscBasis {
    pub freq: Frequency,
    pub n_max: usize,
    /// Rows of B, ordered p₀, q₀, p₁, q₁, ..., each of length n_max + 1.
    pub rep: Vec<LegTrigCoeffs>,
    /// Norm of each row before it was normalized.
    pub norms: Vec<f64>,
    /// Steps k = 0..=n_max. β₀ = δ₀ = 0. The last step is not used to build a row.
    pub rec: Vec<RecurrenceStep>,
    pub stability_warning: Option<StabilityWarning>,
}

struct RecurrenceRun {
    families: (Vec<LegTrigCoeffs>, Vec<LegTrigCoeffs>),
    norms: (Vec<f64>, Vec<f64>),
    rec: Vec<RecurrenceStep>,
}

fn check_inputs(freq: &Frequency, n_max: usize, tables: &InnerProductTables) -> Result<()> {
    if !freq.matches(&tables.freq, 1e-12) {
        return Err(Error::FrequencyMismatch {
            expected: freq.omega(),
            actual: tables.freq.omega(),
        });
    }
    if tables.n_max < n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "a basis with n_max = {n_max} needs tables with n_max >= {}, got {}",
            n_max + 1,
            tables.n_max
        )));
    }
    Ok(())
}

fn checked_norm(f: &LegTrigCoeffs, row: usize, tables: &InnerProductTables) -> Result<f64> {
    let ip = inner_product(f, f, tables)?;
    let h = ip.max(0.0).sqrt();
    if h.is_nan() || h < DEGENERATION_TOL {
        return Err(Error::Degenerate {
            row,
            norm: h,
            threshold: DEGENERATION_TOL,
        });
    }
    Ok(h)
}

fn ratio(num: &LegTrigCoeffs, den: &LegTrigCoeffs, tables: &InnerProductTables) -> Result<f64> {
    Ok(inner_product(num, den, tables)? / inner_product(den, den, tables)?)
}

/// Shared driver for the normalized and monic runs.
fn run_recurrence(
    n_max: usize,
    tables: &InnerProductTables,
    normalize: bool,
    reorthogonalize: bool,
) -> Result<RecurrenceRun> {
    let mut ps: Vec<LegTrigCoeffs> = Vec::with_capacity(n_max + 1);
    let mut qs: Vec<LegTrigCoeffs> = Vec::with_capacity(n_max + 1);
    let mut hp = Vec::with_capacity(n_max + 1);
    let mut hq = Vec::with_capacity(n_max + 1);
    let mut rec = Vec::with_capacity(n_max + 1);

    let accept = |raw: LegTrigCoeffs, row: usize, out: &mut Vec<LegTrigCoeffs>, norms: &mut Vec<f64>| -> Result<()> {
        let h = checked_norm(&raw, row, tables)?;
        norms.push(h);
        out.push(if normalize { raw.scaled(1.0 / h) } else { raw });
        Ok(())
    };

    accept(LegTrigCoeffs::cos_term(0), 0, &mut ps, &mut hp)?;
    accept(LegTrigCoeffs::sin_term(0), 1, &mut qs, &mut hq)?;

    for k in 0..=n_max {
        let xp = ps[k].times_x();
        let xq = qs[k].times_x();
        let alpha = ratio(&xp, &qs[k], tables)?;
        let gamma = ratio(&xq, &ps[k], tables)?;
        let (beta, delta) = if k > 0 {
            (ratio(&xp, &ps[k - 1], tables)?, ratio(&xq, &qs[k - 1], tables)?)
        } else {
            (0.0, 0.0)
        };
        rec.push(RecurrenceStep {
            alpha: Sig17(alpha),
            beta: Sig17(beta),
            gamma: Sig17(gamma),
            delta: Sig17(delta),
        });
        if k == n_max {
            break;
        }

        let mut p_next = xp;
        p_next.add_scaled(-alpha, &qs[k]);
        let mut q_next = xq;
        q_next.add_scaled(-gamma, &ps[k]);
        if k > 0 {
            p_next.add_scaled(-beta, &ps[k - 1]);
            q_next.add_scaled(-delta, &qs[k - 1]);
        }

        if reorthogonalize {
            for prev in ps.iter().chain(qs.iter()) {
                let c = ratio(&p_next, prev, tables)?;
                p_next.add_scaled(-c, prev);
                let c = ratio(&q_next, prev, tables)?;
                q_next.add_scaled(-c, prev);
            }
        }

        accept(p_next, 2 * (k + 1), &mut ps, &mut hp)?;
        accept(q_next, 2 * (k + 1) + 1, &mut qs, &mut hq)?;
    }

    Ok(RecurrenceRun {
        families: (ps, qs),
        norms: (hp, hq),
        rec,
    })
}

/// Build the orthonormal family for degrees 0..=n_max.
///
/// `tables` must cover degree n_max + 1, since the recurrence multiplies
/// degree-n_max rows by x.
pub fn build_basis(
    freq: Frequency,
    n_max: usize,
    tables: &InnerProductTables,
    reorthogonalize: bool,
) -> Result<OscBasis> {
    check_inputs(&freq, n_max, tables)?;
    let stability_warning = freq.stability_check(n_max);
    let run = run_recurrence(n_max, tables, true, reorthogonalize)?;
    let (ps, qs) = run.families;
    let (hp, hq) = run.norms;
    let len = n_max + 1;
    let mut rep = Vec::with_capacity(2 * len);
    let mut norms = Vec::with_capacity(2 * len);
    for k in 0..len {
        rep.push(ps[k].padded(len));
        rep.push(qs[k].padded(len));
        norms.push(hp[k]);
        norms.push(hq[k]);
    }
    Ok(OscBasis {
        freq,
        n_max,
        rep,
        norms,
        rec: run.rec,
        stability_warning,
    })
}

/// Norms ‖p_k‖ and ‖q_k‖ of the un-normalized ("monic") recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct MonicProfile {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl MonicProfile {
    /// Per-step decay factors h_{k+1} / h_k for each family.
    pub fn ratios(&self) -> (Vec<f64>, Vec<f64>) {
        let r = |v: &[f64]| v.windows(2).map(|w| w[1] / w[0]).collect();
        (r(&self.p), r(&self.q))
    }
}

pub fn monic_norm_profile(
    freq: Frequency,
    n_max: usize,
    tables: &InnerProductTables,
) -> Result<MonicProfile> {
    check_inputs(&freq, n_max, tables)?;
    freq.stability_check(n_max);
    let run = run_recurrence(n_max, tables, false, false)?;
    let (p, q) = run.norms;
    Ok(MonicProfile { p, q })
}

impl OscBasis {
    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    pub fn row(&self, index: usize) -> Result<&LegTrigCoeffs> {
        self.rep.get(index).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "row index {index} out of range for a basis with {} rows",
                self.rep.len()
            ))
        })
    }

    pub fn p(&self, k: usize) -> &LegTrigCoeffs {
        &self.rep[2 * k]
    }

    pub fn q(&self, k: usize) -> &LegTrigCoeffs {
        &self.rep[2 * k + 1]
    }

    pub fn evaluate_member(&self, row_index: usize, x: f64) -> Result<f64> {
        Ok(self.row(row_index)?.eval(self.freq.omega(), x))
    }

    /// All member values at x.
    pub fn evaluate_all(&self, x: f64, legendre: &mut Vec<f64>, out: &mut [f64]) {
        eval_legendre_all_into(self.n_max, x, legendre);
        let sc = (self.freq.omega() * x).sin_cos();
        for (o, row) in out.iter_mut().zip(&self.rep) {
            *o = row.eval_with(legendre, sc);
        }
    }

    /// B with one row per member and interleaved (a₀, b₀, a₁, b₁, ...) columns.
    pub fn representation_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut b = DMatrix::zeros(n, n);
        for (i, row) in self.rep.iter().enumerate() {
            for (j, v) in row.interleaved().into_iter().enumerate() {
                b[(i, j)] = v;
            }
        }
        b
    }

    /// Identity used to tie expansions to the basis they were computed in.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&self.freq.omega().to_bits().to_le_bytes());
        bytes.extend_from_slice(&(self.n_max as u64).to_le_bytes());
        for row in &self.rep {
            for v in row.a().iter().chain(row.b()) {
                bytes.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        crate::io::sha256_hex(&bytes)
    }

    pub fn to_document(&self) -> BasisDocument {
        BasisDocument {
            schema_version: SCHEMA_VERSION,
            omega: Sig17(self.freq.omega()),
            k: self.freq.k(),
            epsilon: Sig17(self.freq.epsilon()),
            n_max: self.n_max,
            rows: self.rep.iter().map(CoeffsDocument::from).collect(),
            norms: to_sig17(&self.norms),
            rec: self.rec.clone(),
        }
    }

    pub fn from_document(doc: &BasisDocument) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let freq = Frequency::from_stored(doc.omega.0, doc.k, doc.epsilon.0)?;
        let len = doc.n_max + 1;
        if doc.rows.len() != 2 * len || doc.norms.len() != 2 * len {
            return Err(Error::Parse(format!(
                "basis with n_max = {} needs {} rows and norms, found {} and {}",
                doc.n_max,
                2 * len,
                doc.rows.len(),
                doc.norms.len()
            )));
        }
        let rep = doc
            .rows
            .iter()
            .map(LegTrigCoeffs::try_from)
            .collect::<Result<Vec<_>>>()?;
        if rep.iter().any(|r| r.len() != len) {
            return Err(Error::Parse(format!("every row must have {len} coefficients")));
        }
        Ok(OscBasis {
            freq,
            n_max: doc.n_max,
            rep,
            norms: from_sig17(&doc.norms),
            rec: doc.rec.clone(),
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

    pub fn to_csv(&self) -> String {
        crate::io::matrix_to_csv(&self.representation_matrix())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisDocument {
    pub schema_version: u32,
    pub omega: Sig17,
    pub k: u64,
    pub epsilon: Sig17,
    pub n_max: usize,
    pub rows: Vec<CoeffsDocument>,
    pub norms: Vec<Sig17>,
    pub rec: Vec<RecurrenceStep>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{CompositeRule, OracleConfig};
    use crate::pairing::gram_matrix;
    use crate::tables::build_tables;

    fn setup(k: u64, n: usize) -> (Frequency, InnerProductTables) {
        let f = Frequency::two_pi_multiple(k).unwrap();
        (f, build_tables(f, n + 1).unwrap())
    }

    fn oracle_gram(basis: &OscBasis) -> DMatrix<f64> {
        let rule = CompositeRule::for_frequency(&basis.freq, &OracleConfig::default()).unwrap();
        let mut leg = Vec::new();
        rule.gram(basis.dim(), |x, out| basis.evaluate_all(x, &mut leg, out)).unwrap()
    }

    fn max_dev_from_identity(g: &DMatrix<f64>) -> f64 {
        (g - DMatrix::identity(g.nrows(), g.ncols())).abs().max()
    }

    #[test]
    fn seed_pair_matches_closed_form() {
        let (f, t) = setup(20, 1);
        let w = f.omega();
        // ⟨x p₀, q₀⟩ = ½∫ x sin(2ωx) = −1/(2ω)
        let xp0 = LegTrigCoeffs::cos_term(0).times_x();
        let ip = inner_product(&xp0, &LegTrigCoeffs::sin_term(0), &t).unwrap();
        assert!((ip + 1.0 / (2.0 * w)).abs() < 1e-17);

        // monic p₁ = x p₀ + q₀/(2ω), so the q₀ coefficient b₀ of p₁ (times h) is 1/(2ω)
        let b = build_basis(f, 1, &t, false).unwrap();
        let p1 = b.p(1);
        let h = b.norms[2];
        assert!((p1.b()[0] * h - 1.0 / (2.0 * w)).abs() < 1e-16);
        assert!((p1.a()[1] * h - 1.0).abs() < 1e-15);
        assert!((b.rec[0].alpha.0 + 1.0 / (2.0 * w)).abs() < 1e-16);
        assert!((b.rec[0].gamma.0 + 1.0 / (2.0 * w)).abs() < 1e-16);
        // and q₁ = x q₀ + p₀/(2ω), with the same sign
        let q1 = b.q(1);
        assert!((q1.a()[0] * b.norms[3] - 1.0 / (2.0 * w)).abs() < 1e-16);
    }

    #[test]
    fn degree_zero_rows() {
        for f in [Frequency::two_pi_multiple(3).unwrap(), Frequency::new(7.3).unwrap()] {
            let t = build_tables(f, 1).unwrap();
            let b = build_basis(f, 0, &t, false).unwrap();
            assert_eq!(b.dim(), 2);
            let g = gram_matrix(&b.rep, &t).unwrap();
            assert!(max_dev_from_identity(&g) < 1e-15);
            let norm_cos = (1.0 + (2.0 * f.omega()).sin() / (2.0 * f.omega())).sqrt();
            assert!((b.p(0).a()[0] - 1.0 / norm_cos).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluate_member_examples() {
        let (f, t) = setup(20, 3);
        let b = build_basis(f, 3, &t, false).unwrap();
        assert!((b.evaluate_member(0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(b.evaluate_member(1, 0.0).unwrap(), 0.0);
        assert_eq!(b.evaluate_member(2, 0.0).unwrap(), 0.0);
        assert!(b.evaluate_member(8, 0.0).is_err());
    }

    #[test]
    fn parity_pattern_is_exact() {
        for f in [Frequency::two_pi_multiple(20).unwrap(), Frequency::new(95.5).unwrap()] {
            let t = build_tables(f, 11).unwrap();
            for reorth in [false, true] {
                let b = build_basis(f, 10, &t, reorth).unwrap();
                for k in 0..=10 {
                    for j in 0..=10 {
                        let same = (j + k) % 2 == 0;
                        let (p, q) = (b.p(k), b.q(k));
                        if j > k {
                            assert_eq!(p.a()[j], 0.0);
                            assert_eq!(p.b()[j], 0.0);
                            assert_eq!(q.a()[j], 0.0);
                            assert_eq!(q.b()[j], 0.0);
                        } else if same {
                            assert_eq!(p.b()[j], 0.0, "p_{k} sine at {j}");
                            assert_eq!(q.a()[j], 0.0, "q_{k} cosine at {j}");
                        } else {
                            assert_eq!(p.a()[j], 0.0, "p_{k} cosine at {j}");
                            assert_eq!(q.b()[j], 0.0, "q_{k} sine at {j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rows_have_unit_norm() {
        let (f, t) = setup(20, 12);
        let b = build_basis(f, 12, &t, false).unwrap();
        for row in &b.rep {
            assert!((crate::pairing::norm(row, &t).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormal_by_tables_and_oracle() {
        let (f, t) = setup(20, 12);
        let b = build_basis(f, 12, &t, false).unwrap();
        assert!(max_dev_from_identity(&gram_matrix(&b.rep, &t).unwrap()) < 1e-10);
        assert!(max_dev_from_identity(&oracle_gram(&b)) < 1e-8);
    }

    #[test]
    fn orthonormal_across_frequencies() {
        for k in [10u64, 20, 50] {
            let w = std::f64::consts::TAU * k as f64;
            let n = 12usize.min((w / 2.0) as usize);
            let (f, t) = setup(k, n);
            let plain = build_basis(f, n, &t, false).unwrap();
            let re = build_basis(f, n, &t, true).unwrap();
            let d_plain = max_dev_from_identity(&oracle_gram(&plain));
            let d_re = max_dev_from_identity(&oracle_gram(&re));
            assert!(d_plain <= 1e-8, "k={k} {d_plain:e}");
            assert!(d_re <= 1e-8, "k={k} {d_re:e}");
            // reorthogonalization only changes rounding-level noise here
            assert!(d_re <= d_plain.max(4e-15) * 4.0, "k={k} {d_re:e} vs {d_plain:e}");
        }
    }

    #[test]
    fn recurrence_rebuilds_rows() {
        let (f, t) = setup(20, 10);
        let b = build_basis(f, 10, &t, false).unwrap();
        for k in 0..10 {
            let s = b.rec[k];
            let mut p = b.p(k).times_x();
            p.add_scaled(-s.alpha.0, b.q(k));
            let mut q = b.q(k).times_x();
            q.add_scaled(-s.gamma.0, b.p(k));
            if k > 0 {
                p.add_scaled(-s.beta.0, b.p(k - 1));
                q.add_scaled(-s.delta.0, b.q(k - 1));
            }
            let stored_p = b.p(k + 1).scaled(b.norms[2 * k + 2]);
            let stored_q = b.q(k + 1).scaled(b.norms[2 * k + 3]);
            assert!(p.max_abs_diff(&stored_p) < 1e-12, "p step {k}");
            assert!(q.max_abs_diff(&stored_q) < 1e-12, "q step {k}");
        }
        assert_eq!(b.rec.len(), 11);
        assert_eq!(b.rec[0].beta.0, 0.0);
        assert_eq!(b.rec[0].delta.0, 0.0);
    }

    #[test]
    fn span_contains_monomial_trig() {
        // x^k cos(ωx) projected on rows 0..2k+1 leaves only quadrature noise
        let (f, t) = setup(20, 8);
        let b = build_basis(f, 8, &t, false).unwrap();
        let rule = CompositeRule::for_frequency(&f, &OracleConfig::default()).unwrap();
        let w = f.omega();
        let mut leg = Vec::new();
        let mut vals = vec![0.0; b.dim()];
        for k in 0..=8 {
            let target = |x: f64| x.powi(k as i32) * (w * x).cos();
            let rows = 2 * k + 2;
            let coeffs: Vec<f64> = (0..rows)
                .map(|i| rule.integrate(|x| target(x) * b.evaluate_member(i, x).unwrap()).unwrap())
                .collect();
            let mut res2 = 0.0;
            for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
                b.evaluate_all(x, &mut leg, &mut vals);
                let approx: f64 = coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum();
                res2 += wt * (target(x) - approx).powi(2);
            }
            assert!(res2.sqrt() <= 1e-7, "k={k} residual {:e}", res2.sqrt());
        }
    }

    #[test]
    fn monic_norms_decay() {
        let (f, t) = setup(20, 10);
        let prof = monic_norm_profile(f, 10, &t).unwrap();
        assert!((prof.p[0] - 1.0).abs() < 1e-15);
        assert!(prof.p.windows(2).all(|w| w[1] < w[0]));
        assert!(prof.q.windows(2).all(|w| w[1] < w[0]));
        let (rp, _) = prof.ratios();
        // Legendre-like decay: each step roughly halves the norm
        assert!(rp[3..].iter().all(|r| *r > 0.4 && *r < 0.6), "{rp:?}");
    }

    #[test]
    fn input_checks() {
        let (f, t) = setup(20, 4);
        assert!(build_basis(f, 5, &t, false).is_err());
        let other = Frequency::two_pi_multiple(21).unwrap();
        assert!(matches!(
            build_basis(other, 2, &t, false),
            Err(Error::FrequencyMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_rows_rejected() {
        let (f, mut t) = setup(20, 2);
        // wipe the tables so every norm is zero
        for kind in crate::oracle::TableKind::ALL {
            t.get_mut(kind).fill(0.0);
        }
        assert!(matches!(build_basis(f, 1, &t, false), Err(Error::Degenerate { row: 0, .. })));
    }

    #[test]
    fn low_frequency_warns() {
        let (f, t) = setup(1, 8);
        let b = build_basis(f, 8, &t, false);
        // ω ≈ 6.28 < 8
        match b {
            Ok(b) => assert!(b.stability_warning.is_some()),
            Err(e) => assert!(matches!(e, Error::Degenerate { .. })),
        }
    }

    #[test]
    fn representation_matrix_is_lower_triangular() {
        let (f, t) = setup(20, 5);
        let b = build_basis(f, 5, &t, false).unwrap();
        let m = b.representation_matrix();
        assert_eq!(m.shape(), (12, 12));
        for i in 0..12 {
            assert!(m[(i, i)] != 0.0);
            for j in (i + 1)..12 {
                assert_eq!(m[(i, j)], 0.0);
            }
        }
        let csv = b.to_csv();
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn json_round_trip() {
        let f = Frequency::new(std::f64::consts::TAU * 20.0 + 0.3).unwrap();
        let t = build_tables(f, 7).unwrap();
        let b = build_basis(f, 6, &t, false).unwrap();
        let back = OscBasis::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(back.content_hash(), b.content_hash());
        assert_eq!(back.rep, b.rep);
        assert_eq!(back.norms, b.norms);
        assert_eq!(back.rec, b.rec);
    }
}
