//! Legendre polynomial primitives.
//!
//! P_n is evaluated with the forward three-term recurrence
//! (n+1) P_{n+1}(x) = (2n+1) x P_n(x) - n P_{n-1}(x),
//! which is stable on [-1, 1].

use std::f64::consts::PI;

/// Evaluate P_degree(x).
pub fn eval_legendre(degree: usize, x: f64) -> f64 {
    match degree {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut curr = x;
            for n in 1..degree {
                let next = ((2 * n + 1) as f64 * x * curr - n as f64 * prev) / (n + 1) as f64;
                prev = curr;
                curr = next;
            }
            curr
        }
    }
}

/// Values P_0(x), ..., P_max_degree(x) written into `out`.
pub fn eval_legendre_all_into(max_degree: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max_degree == 0 {
        return;
    }
    out.push(x);
    for n in 1..max_degree {
        let next = ((2 * n + 1) as f64 * x * out[n] - n as f64 * out[n - 1]) / (n + 1) as f64;
        out.push(next);
    }
}

/// Values P_0(x), ..., P_max_degree(x).
pub fn eval_legendre_all(max_degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    eval_legendre_all_into(max_degree, x, &mut out);
    out
}

/// ‖P_degree‖² = 2 / (2·degree + 1) on [-1, 1].
pub fn legendre_norm_sq(degree: usize) -> f64 {
    2.0 / (2 * degree + 1) as f64
}

/// One term of the expansion of P_j' in the Legendre basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivTerm {
    pub target_degree: usize,
    pub coefficient: f64,
}

/// P_j'(x) = Σ (2m+1) P_m(x) over m = j-1, j-3, ... ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivExpansion {
    pub source_degree: usize,
    pub terms: Vec<DerivTerm>,
}

impl DerivExpansion {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * eval_legendre(t.target_degree, x))
            .sum()
    }
}

/// Target degrees j-1, j-3, ... down to 0 or 1. Empty for j = 0.
pub fn derivative_targets(degree: usize) -> impl Iterator<Item = usize> {
    (0..degree / 2 + degree % 2).map(move |l| degree - 1 - 2 * l)
}

pub fn derivative_expansion(degree: usize) -> DerivExpansion {
    let terms = derivative_targets(degree)
        .map(|m| DerivTerm {
            target_degree: m,
            coefficient: (2 * m + 1) as f64,
        })
        .collect();
    DerivExpansion {
        source_degree: degree,
        terms,
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Apply the rule on [a, b].
    pub fn integrate_on<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        half * sum
    }
}

/// P_n(x) and P_n'(x) together.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut curr = x;
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * x * curr - k as f64 * prev) / (k + 1) as f64;
        prev = curr;
        curr = next;
    }
    // valid for interior x only, which is all Newton ever sees
    let deriv = n as f64 * (x * curr - prev) / (x * x - 1.0);
    (curr, deriv)
}

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// n-point Gauss-Legendre rule by Newton iteration from Chebyshev-like
/// initial guesses. Nodes are returned in increasing order and the rule is
/// exactly symmetric about 0.
pub fn gauss_legendre_rule(n_points: usize) -> QuadratureRule {
    assert!(n_points >= 1, "a quadrature rule needs at least one point");
    if n_points == 1 {
        return QuadratureRule {
            nodes: vec![0.0],
            weights: vec![2.0],
        };
    }
    let n = n_points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= NEWTON_TOL {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_values() {
        assert_eq!(eval_legendre(0, 0.37), 1.0);
        assert_eq!(eval_legendre(1, -0.5), -0.5);
        assert!((eval_legendre(2, 0.5) - (-0.125)).abs() < 1e-15);
        let x: f64 = 0.3;
        assert!((eval_legendre(3, x) - (5.0 * x.powi(3) - 3.0 * x) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bounded_and_unit_at_endpoints() {
        for n in 0..=64 {
            assert!((eval_legendre(n, 1.0) - 1.0).abs() < 1e-13);
            for i in 0..=40 {
                let x = -1.0 + i as f64 / 20.0;
                assert!(eval_legendre(n, x).abs() <= 1.0 + 1e-13);
            }
        }
    }

    #[test]
    fn legendre_all_matches_single() {
        let v = eval_legendre_all(30, 0.71);
        for (n, p) in v.iter().enumerate() {
            assert_eq!(*p, eval_legendre(n, 0.71));
        }
        assert_eq!(eval_legendre_all(0, 0.2), vec![1.0]);
    }

    #[test]
    fn norms() {
        assert_eq!(legendre_norm_sq(0), 2.0);
        assert_eq!(legendre_norm_sq(1), 2.0 / 3.0);
        assert_eq!(legendre_norm_sq(5), 2.0 / 11.0);
    }

    #[test]
    fn derivative_expansion_examples() {
        assert!(derivative_expansion(0).terms.is_empty());
        let one = derivative_expansion(1);
        assert_eq!(
            one.terms,
            vec![DerivTerm {
                target_degree: 0,
                coefficient: 1.0
            }]
        );
        let three: Vec<(usize, f64)> = derivative_expansion(3)
            .terms
            .iter()
            .map(|t| (t.target_degree, t.coefficient))
            .collect();
        assert_eq!(three, vec![(2, 5.0), (0, 1.0)]);
    }

    #[test]
    fn derivative_expansion_against_projection() {
        // project P_3' = (15x² - 3)/2 onto P_m with a 16-point rule
        let rule = gauss_legendre_rule(16);
        let dp3 = |x: f64| (15.0 * x * x - 3.0) / 2.0;
        for m in 0..3 {
            let c = rule.integrate_on(-1.0, 1.0, |x| dp3(x) * eval_legendre(m, x))
                / legendre_norm_sq(m);
            let expected = match m {
                0 => 1.0,
                2 => 5.0,
                _ => 0.0,
            };
            assert!((c - expected).abs() < 1e-13, "m={m} c={c}");
        }
    }

    #[test]
    fn derivative_expansion_invariants() {
        for j in 0..=30 {
            let e = derivative_expansion(j);
            assert_eq!(e.terms.len(), j.div_ceil(2));
            for t in &e.terms {
                assert!(t.target_degree < j);
                assert_eq!((j - t.target_degree) % 2, 1);
                assert_eq!(t.coefficient, (2 * t.target_degree + 1) as f64);
            }
        }
    }

    #[test]
    fn derivative_expansion_matches_finite_difference() {
        let h = 1e-6;
        for j in 0..=20 {
            let e = derivative_expansion(j);
            for i in 0..=18 {
                let x = -0.9 + 0.1 * i as f64;
                let fd = (eval_legendre(j, x + h) - eval_legendre(j, x - h)) / (2.0 * h);
                assert!((e.eval(x) - fd).abs() < 1e-5, "j={j} x={x}");
            }
        }
    }

    #[test]
    fn small_rules() {
        let r1 = gauss_legendre_rule(1);
        assert_eq!(r1.nodes, vec![0.0]);
        assert_eq!(r1.weights, vec![2.0]);
        let r2 = gauss_legendre_rule(2);
        let s = 1.0 / 3f64.sqrt();
        assert!((r2.nodes[0] + s).abs() < 1e-15);
        assert!((r2.nodes[1] - s).abs() < 1e-15);
        assert!((r2.weights[0] - 1.0).abs() < 1e-15);
        assert!((r2.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rules_are_exact_for_monomials() {
        for n in [3usize, 7, 16, 33, 64, 128] {
            let r = gauss_legendre_rule(n);
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14, "n={n}");
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.weights.iter().all(|w| *w > 0.0));
            assert!(r.nodes.iter().all(|x| x.abs() < 1.0));
            for m in 0..(2 * n).min(32) {
                let exact = if m % 2 == 0 { 2.0 / (m + 1) as f64 } else { 0.0 };
                let got = r.integrate_on(-1.0, 1.0, |x| x.powi(m as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} m={m}");
            }
        }
        let r16 = gauss_legendre_rule(16);
        let top = r16.integrate_on(-1.0, 1.0, |x| x.powi(30));
        assert!((top - 2.0 / 31.0).abs() < 1e-13);
        let odd = r16.integrate_on(-1.0, 1.0, |x| x.powi(31));
        assert!(odd.abs() < 1e-13);
    }

    #[test]
    fn sixteen_point_nodes_are_roots() {
        let r = gauss_legendre_rule(16);
        for x in &r.nodes {
            assert!(eval_legendre(16, *x).abs() < 1e-14);
        }
    }

    #[test]
    fn orthogonality_under_64_point_rule() {
        let r = gauss_legendre_rule(64);
        for j in 0..=20 {
            for k in 0..=20 {
                let v = r.integrate_on(-1.0, 1.0, |x| eval_legendre(j, x) * eval_legendre(k, x));
                if j == k {
                    assert!((v - legendre_norm_sq(j)).abs() < 1e-12);
                } else {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn parity(k in 0usize..=64, x in -1.0f64..=1.0) {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let lhs = eval_legendre(k, -x);
                let rhs = sign * eval_legendre(k, x);
                prop_assert!((lhs - rhs).abs() <= 1e-14);
            }
        }
    }
}
