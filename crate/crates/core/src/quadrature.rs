//! Gaussian quadrature rules used by the closed-form predictions.
//!
//! Gauss-Hermite absorbs the Gaussian phase distribution exactly (after the
//! substitution `phi = sqrt(2) sigma t` the weight becomes `exp(-t^2)`);
//! Gauss-Legendre handles the finite trigger window of the POVM
//! coefficients. Nodes and weights are found by Newton iteration on the
//! orthonormal-polynomial recurrences, which keeps intermediate values of
//! order one up to very high node counts. Every rule verifies its own
//! polynomial exactness at construction.

use thiserror::Error;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;
const EXACTNESS_TOL: f64 = 1e-11;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature rule needs at least one node")]
    EmptyRule,
    #[error("Newton iteration for node {index} of the {kind} rule did not converge")]
    NewtonDivergence { kind: &'static str, index: usize },
    #[error(
        "{kind} rule with {nodes} nodes failed its exactness check on moment {moment}: \
         got {got}, expected {expected}"
    )]
    ExactnessCheckFailed {
        kind: &'static str,
        nodes: usize,
        moment: usize,
        got: f64,
        expected: f64,
    },
}

/// Nodes and weights of a Gaussian quadrature rule. Exactness on
/// polynomials up to the rule order is verified when the rule is built.
/// Weights are strictly positive except that Gauss-Hermite tail weights
/// beyond roughly 300 nodes underflow to zero (their true values sit below
/// the smallest subnormal and contribute nothing to any integral).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss-Hermite rule for the weight `exp(-t^2)` on the real line
    /// (physicists' convention). Nodes are in ascending order.
    pub fn gauss_hermite(n: usize) -> Result<Self, QuadratureError> {
        if n == 0 {
            return Err(QuadratureError::EmptyRule);
        }
        // All roots lie strictly inside the turning points +-sqrt(2n+1) and
        // the spacing in the bulk is about pi/sqrt(2n), so a scan a few
        // times finer than that brackets every positive root; bisection
        // plus a Newton polish then nails each one. Extrapolation-style
        // seeding skips roots in the dense bulk once n grows past a couple
        // of hundred, hence the bracketing.
        let positive = brackets_of_positive_hermite_roots(n)?;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for (i, &(lo, hi)) in positive.iter().enumerate() {
            let z = refine_hermite_root(n, lo, hi, i)?;
            // Positive roots ascending fill the upper half, mirrored below.
            let hi_idx = n / 2 + i + n % 2;
            let lo_idx = n / 2 - 1 - i;
            let w = hermite_weight(n, z);
            nodes[hi_idx] = z;
            weights[hi_idx] = w;
            nodes[lo_idx] = -z;
            weights[lo_idx] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
            weights[n / 2] = hermite_weight(n, 0.0);
        }
        let rule = Self { nodes, weights };
        rule.verify_hermite(n)?;
        Ok(rule)
    }

    /// Gauss-Legendre rule on `[-1, 1]`. Nodes are in ascending order.
    pub fn gauss_legendre(n: usize) -> Result<Self, QuadratureError> {
        if n == 0 {
            return Err(QuadratureError::EmptyRule);
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (pn, pn_prev) = legendre(n, z);
                let deriv = n as f64 * (z * pn - pn_prev) / (z * z - 1.0);
                let step = pn / deriv;
                z -= step;
                if step.abs() <= NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(QuadratureError::NewtonDivergence {
                    kind: "Gauss-Legendre",
                    index: i,
                });
            }
            let (pn, pn_prev) = legendre(n, z);
            let deriv = n as f64 * (z * pn - pn_prev) / (z * z - 1.0);
            let w = 2.0 / ((1.0 - z * z) * deriv * deriv);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let rule = Self { nodes, weights };
        rule.verify_legendre(n)?;
        Ok(rule)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted sum `sum_i w_i f(x_i)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    // Even monomial moments of exp(-t^2): sqrt(pi) (2k-1)!! / 2^k. Checked
    // up to the rule order (or moment 20, whichever is smaller).
    fn verify_hermite(&self, n: usize) -> Result<(), QuadratureError> {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut expected = sqrt_pi;
        for k in 0..=(n - 1).min(10) {
            if k > 0 {
                expected *= (2 * k - 1) as f64 / 2.0;
            }
            let got = self.integrate(|t| t.powi(2 * k as i32));
            if (got - expected).abs() > EXACTNESS_TOL * expected.abs() {
                return Err(QuadratureError::ExactnessCheckFailed {
                    kind: "Gauss-Hermite",
                    nodes: n,
                    moment: 2 * k,
                    got,
                    expected,
                });
            }
        }
        Ok(())
    }

    fn verify_legendre(&self, n: usize) -> Result<(), QuadratureError> {
        for k in 0..=(n - 1).min(10) {
            let expected = 2.0 / (2 * k + 1) as f64;
            let got = self.integrate(|t| t.powi(2 * k as i32));
            if (got - expected).abs() > EXACTNESS_TOL * expected.abs() {
                return Err(QuadratureError::ExactnessCheckFailed {
                    kind: "Gauss-Legendre",
                    nodes: n,
                    moment: 2 * k,
                    got,
                    expected,
                });
            }
        }
        Ok(())
    }
}

// Sign-change brackets of the strictly positive roots of the orthonormal
// Hermite polynomial, ascending. Scans (0, sqrt(2n+1)) at a quarter of the
// minimal root spacing; refines the grid if any root slips through.
fn brackets_of_positive_hermite_roots(n: usize) -> Result<Vec<(f64, f64)>, QuadratureError> {
    let expected = n / 2;
    if expected == 0 {
        return Ok(Vec::new());
    }
    let limit = ((2 * n + 1) as f64).sqrt();
    let mut step = std::f64::consts::PI / (4.0 * limit);
    for _ in 0..4 {
        let mut brackets = Vec::with_capacity(expected);
        // For odd n the origin itself is a root; start clear of it either way.
        let mut t = step * 0.5;
        let (mut prev_val, _, _) = hermite_orthonormal(n, t);
        while t < limit && brackets.len() < expected {
            let next = t + step;
            let (val, _, _) = hermite_orthonormal(n, next);
            if prev_val == 0.0 || prev_val.signum() != val.signum() {
                brackets.push((t, next));
            }
            t = next;
            prev_val = val;
        }
        if brackets.len() == expected {
            return Ok(brackets);
        }
        step *= 0.5;
    }
    Err(QuadratureError::NewtonDivergence {
        kind: "Gauss-Hermite",
        index: 0,
    })
}

// Bisection into the bracket followed by a Newton polish.
fn refine_hermite_root(
    n: usize,
    mut lo: f64,
    mut hi: f64,
    index: usize,
) -> Result<f64, QuadratureError> {
    let (mut f_lo, _, _) = hermite_orthonormal(n, lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (f_mid, _, _) = hermite_orthonormal(n, mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_lo.signum() == f_mid.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITER {
        let (pn, pn_prev, _) = hermite_orthonormal(n, z);
        let deriv = (2.0 * n as f64).sqrt() * pn_prev;
        let step = pn / deriv;
        z -= step;
        if step.abs() <= NEWTON_TOL * (1.0 + z.abs()) {
            return Ok(z);
        }
    }
    Err(QuadratureError::NewtonDivergence {
        kind: "Gauss-Hermite",
        index,
    })
}

// Weight at a node: w = 2 / (p_n'(z))^2 with p_n'(z) = sqrt(2n) p_{n-1}(z).
// Honors the rescaling exponent: once the polynomial value has been scaled
// down even once, the true weight sits far below the subnormal range.
fn hermite_weight(n: usize, z: f64) -> f64 {
    let (_, pn_prev, scale) = hermite_orthonormal(n, z);
    if scale > 0 {
        return 0.0;
    }
    let deriv = (2.0 * n as f64).sqrt() * pn_prev;
    2.0 / (deriv * deriv)
}

// Orthonormal Hermite polynomials w.r.t. exp(-t^2): returns
// (p_n, p_{n-1}, scale) where the true values are the returned ones times
// 1e300^scale. Outside the oscillatory region the raw values blow past the
// f64 range for large n; the shared rescaling keeps signs and the
// p_n/p_{n-1} ratio exact, which is all the root finder needs.
fn hermite_orthonormal(n: usize, t: f64) -> (f64, f64, i32) {
    const LIMIT: f64 = 1e300;
    const SHRINK: f64 = 1e-300;
    let mut scale = 0;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    for k in 0..n {
        let next =
            t * (2.0 / (k as f64 + 1.0)).sqrt() * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > LIMIT {
            cur *= SHRINK;
            prev *= SHRINK;
            scale += 1;
        }
    }
    (cur, prev, scale)
}

// Legendre polynomials by the three-term recurrence; returns (P_n, P_{n-1}).
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k as f64 + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_weights_positive_and_normalized() {
        for &n in &[1usize, 2, 5, 64, 129, 512] {
            let rule = QuadratureRule::gauss_hermite(n).unwrap();
            assert_eq!(rule.len(), n);
            if n <= 256 {
                assert!(rule.weights().iter().all(|&w| w > 0.0));
            } else {
                // Tail weights shrink like exp(-x^2) and fall below the
                // smallest subnormal once nodes pass ~27; they round to 0.
                assert!(rule.weights().iter().all(|&w| w >= 0.0));
                assert!(rule.weights()[n / 2] > 0.0);
            }
            let total: f64 = rule.weights().iter().sum();
            assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_integrates_gaussian_expectations() {
        // E[cos(2 phi)] = exp(-2 sigma^2) for phi ~ N(0, sigma^2), written as
        // an integral against exp(-t^2) via phi = sqrt(2) sigma t.
        let rule = QuadratureRule::gauss_hermite(64).unwrap();
        let sigma: f64 = 0.28;
        let scale = std::f64::consts::SQRT_2 * sigma;
        let got = rule.integrate(|t| (2.0 * scale * t).cos()) / std::f64::consts::PI.sqrt();
        let expected = (-2.0 * sigma * sigma).exp();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn legendre_weights_positive_and_normalized() {
        for &n in &[1, 2, 7, 64, 255] {
            let rule = QuadratureRule::gauss_legendre(n).unwrap();
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn legendre_integrates_smooth_function() {
        let rule = QuadratureRule::gauss_legendre(32).unwrap();
        let got = rule.integrate(f64::exp);
        let expected = std::f64::consts::E - 1.0 / std::f64::consts::E;
        assert!((got - expected).abs() < 1e-13);
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(matches!(
            QuadratureRule::gauss_hermite(0),
            Err(QuadratureError::EmptyRule)
        ));
        assert!(matches!(
            QuadratureRule::gauss_legendre(0),
            Err(QuadratureError::EmptyRule)
        ));
    }

    #[test]
    fn nodes_sorted_and_symmetric() {
        let rule = QuadratureRule::gauss_hermite(33).unwrap();
        let nodes = rule.nodes();
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(nodes[16], 0.0);
        for i in 0..16 {
            assert!((nodes[i] + nodes[32 - i]).abs() < 1e-12);
        }
    }
}
