//! Brute-force verification by composite Gauss-Legendre quadrature.
//!
//! Nothing here touches the table recursion: every inner product is computed
//! by sampling the integrand directly, which is what makes it usable as an
//! independent check on the recursion, the basis and the projections.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frequency::Frequency;
use crate::legendre::{eval_legendre, eval_legendre_all_into, gauss_legendre_rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub panels_per_period: usize,
    pub points_per_panel: usize,
    pub min_panels: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            panels_per_period: 4,
            points_per_panel: 24,
            min_panels: 8,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.panels_per_period < 2 {
            return Err(Error::InvalidParameter("panels_per_period must be >= 2".into()));
        }
        if self.points_per_panel < 8 {
            return Err(Error::InvalidParameter("points_per_panel must be >= 8".into()));
        }
        if self.min_panels == 0 {
            return Err(Error::InvalidParameter("min_panels must be >= 1".into()));
        }
        Ok(())
    }

    /// max(min_panels, ceil(panels_per_period · ω / π))
    pub fn panel_count(&self, omega: f64) -> usize {
        let by_freq = (self.panels_per_period as f64 * omega / PI).ceil() as usize;
        by_freq.max(self.min_panels)
    }
}

/// Composite rule on [-1, 1]: equal panels, the same Gauss-Legendre rule per panel.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(omega: f64, cfg: &OracleConfig) -> Result<Self> {
        cfg.validate()?;
        let panels = cfg.panel_count(omega);
        let base = gauss_legendre_rule(cfg.points_per_panel);
        let width = 2.0 / panels as f64;
        let half = 0.5 * width;
        let mut nodes = Vec::with_capacity(panels * base.len());
        let mut weights = Vec::with_capacity(panels * base.len());
        for p in 0..panels {
            let mid = -1.0 + (p as f64 + 0.5) * width;
            for (x, w) in base.nodes.iter().zip(&base.weights) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Ok(CompositeRule { nodes, weights })
    }

    pub fn for_frequency(freq: &Frequency, cfg: &OracleConfig) -> Result<Self> {
        Self::new(freq.omega(), cfg)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ wᵢ F(xᵢ), summed in node order.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x });
            }
            sum += w * v;
        }
        Ok(sum)
    }

    /// Gram matrix of `dim` functions. `eval(x, out)` fills `out` with the
    /// values of all functions at x.
    pub fn gram<F: FnMut(f64, &mut [f64])>(&self, dim: usize, mut eval: F) -> Result<DMatrix<f64>> {
        let mut g = DMatrix::zeros(dim, dim);
        let mut vals = vec![0.0; dim];
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            eval(x, &mut vals);
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { x });
            }
            for i in 0..dim {
                let wi = w * vals[i];
                for j in i..dim {
                    g[(i, j)] += wi * vals[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        Ok(g)
    }
}

/// ∫₋₁¹ F(x) dx, with the panel count set by `freq`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, freq: &Frequency, cfg: &OracleConfig) -> Result<f64> {
    CompositeRule::for_frequency(freq, cfg)?.integrate(f)
}

/// The six inner-product tables, by their defining integrands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableKind {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
}

impl TableKind {
    pub const ALL: [TableKind; 6] = [
        TableKind::M1,
        TableKind::M2,
        TableKind::M3,
        TableKind::M4,
        TableKind::M5,
        TableKind::M6,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TableKind::M1 => "m1",
            TableKind::M2 => "m2",
            TableKind::M3 => "m3",
            TableKind::M4 => "m4",
            TableKind::M5 => "m5",
            TableKind::M6 => "m6",
        }
    }

    /// Weight multiplying P_j(x) P_k(x) in the integrand.
    fn weight(&self, omega: f64, x: f64) -> f64 {
        let (s, c) = (omega * x).sin_cos();
        match self {
            TableKind::M1 => 1.0,
            TableKind::M2 => c * s,
            TableKind::M3 => c * c,
            TableKind::M4 => s * s,
            TableKind::M5 => (2.0 * omega * x).cos(),
            TableKind::M6 => (2.0 * omega * x).sin(),
        }
    }
}

/// Direct quadrature of the integrand defining entry (j, k) of `kind`.
pub fn oracle_entry(
    kind: TableKind,
    j: usize,
    k: usize,
    freq: &Frequency,
    cfg: &OracleConfig,
) -> Result<f64> {
    let omega = freq.omega();
    integrate(
        |x| eval_legendre(j, x) * eval_legendre(k, x) * kind.weight(omega, x),
        freq,
        cfg,
    )
}

/// All entries 0..=n of `kind` in one sweep over the nodes.
pub fn oracle_matrix(
    kind: TableKind,
    n: usize,
    freq: &Frequency,
    cfg: &OracleConfig,
) -> Result<DMatrix<f64>> {
    let rule = CompositeRule::for_frequency(freq, cfg)?;
    let omega = freq.omega();
    let mut p = Vec::with_capacity(n + 1);
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        eval_legendre_all_into(n, x, &mut p);
        let ww = w * kind.weight(omega, x);
        for j in 0..=n {
            let wj = ww * p[j];
            for k in j..=n {
                m[(j, k)] += wj * p[k];
            }
        }
    }
    for j in 0..=n {
        for k in 0..j {
            m[(j, k)] = m[(k, j)];
        }
    }
    Ok(m)
}

/// H[i][j] = ⟨xⁱ cos(ωx), xʲ cos(ωx)⟩ by quadrature.
pub fn monomial_gram(freq: &Frequency, n: usize, cfg: &OracleConfig) -> Result<DMatrix<f64>> {
    let rule = CompositeRule::for_frequency(freq, cfg)?;
    let omega = freq.omega();
    rule.gram(n + 1, |x, out| {
        let c = (omega * x).cos();
        let mut pow = 1.0;
        for v in out.iter_mut() {
            *v = pow * c;
            pow *= x;
        }
    })
}

/// Gram of the interleaved Legendre-trig functions P̂_j cos(ωx), P̂_j sin(ωx),
/// j = 0..=n, where P̂_j = √((2j+1)/2) P_j has unit L² norm.
pub fn legtrig_gram(freq: &Frequency, n: usize, cfg: &OracleConfig) -> Result<DMatrix<f64>> {
    let rule = CompositeRule::for_frequency(freq, cfg)?;
    let omega = freq.omega();
    let scale: Vec<f64> = (0..=n).map(|j| ((2 * j + 1) as f64 / 2.0).sqrt()).collect();
    let mut leg = Vec::new();
    rule.gram(2 * (n + 1), |x, out| {
        eval_legendre_all_into(n, x, &mut leg);
        let (s, c) = (omega * x).sin_cos();
        for j in 0..=n {
            let p = scale[j] * leg[j];
            out[2 * j] = p * c;
            out[2 * j + 1] = p * s;
        }
    })
}

/// The ω → ∞ limit of [`monomial_gram`] on [-1, 1]:
/// L[i][j] = (1 + (-1)^(i+j)) / (2(i+j+1)).
pub fn hilbert_limit(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if (i + j) % 2 == 0 {
            1.0 / (i + j + 1) as f64
        } else {
            0.0
        }
    })
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(matrix)?;
    let n = matrix.nrows();
    let mut a = matrix.clone();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[(i, i)] * a[(i, i)];
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= f64::EPSILON * f64::EPSILON * diag * 1e-4 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidParameter(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut asym: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// 2-norm condition number max|λ| / min|λ| of a symmetric matrix.
/// Infinite when the matrix is singular.
pub fn cond_estimate(matrix: &DMatrix<f64>) -> Result<f64> {
    if matrix.is_empty() {
        return Err(Error::InvalidParameter("empty matrix has no condition number".into()));
    }
    let eig = symmetric_eigenvalues(matrix)?;
    let largest = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let smallest = eig.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if smallest == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(largest / smallest)
}
