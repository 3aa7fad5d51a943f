//! Gauss–Legendre rules and an adaptive bisection integrator.
//!
//! The adaptive routine compares the 16-point and 8-point rules on each
//! panel and bisects until the difference drops below the panel's share of
//! the tolerance. The accepted value is the 16-point result, so the reported
//! error is an overestimate for smooth integrands.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Newton iteration on the three-term Legendre recurrence.
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Applies the rule on [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let hl = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(c + hl * x))
            .sum::<f64>()
            * hl
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gauss8() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::legendre(8))
}

pub fn gauss16() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::legendre(16))
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl Integral {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            error: 0.0,
            evals: 0,
            converged: true,
        }
    }

    pub fn add(&mut self, other: Integral) {
        self.value += other.value;
        self.error += other.error;
        self.evals += other.evals;
        self.converged &= other.converged;
    }
}

/// Adaptive G16/G8 bisection on [a, b] with absolute tolerance `tol`.
///
/// Panels narrower than `(b - a) * 2^-max_depth` are accepted regardless;
/// the result is marked not converged when the summed panel errors exceed `tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Integral {
    let g8 = gauss8();
    let g16 = gauss16();
    let total = b - a;
    let mut out = Integral::zero();
    if total == 0.0 {
        return out;
    }
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let v16 = g16.integrate(lo, hi, &mut f);
        let v8 = g8.integrate(lo, hi, &mut f);
        out.evals += 24;
        let err = (v16 - v8).abs();
        let local_tol = tol * ((hi - lo) / total).abs();
        if err <= local_tol.max(1e-15 * v16.abs()) || depth >= max_depth {
            out.value += v16;
            out.error += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    out.converged = out.error <= tol;
    out
}

/// ∫_{lo}^{hi} r^p dr for 0 <= lo < hi (lo > 0 when p <= -1).
pub fn power_integral(p: f64, lo: f64, hi: f64) -> f64 {
    if (p + 1.0).abs() < 1e-14 {
        (hi / lo).ln()
    } else if lo == 0.0 {
        hi.powf(p + 1.0) / (p + 1.0)
    } else {
        (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / (p + 1.0)
    }
}

/// ∫_{lo}^{∞} r^p dr for p < -1.
pub fn power_tail(p: f64, lo: f64) -> f64 {
    debug_assert!(p < -1.0);
    -lo.powf(p + 1.0) / (p + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rules_integrate_polynomials_exactly() {
        for n in [1, 2, 5, 8, 16, 31] {
            let rule = GaussRule::legendre(n);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n={n} wsum={wsum}");
            let deg = 2 * n - 1;
            let v = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10, 60);
        assert!((r.value - 2.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn power_integrals() {
        assert!((power_integral(-1.0, 1.0, std::f64::consts::E) - 1.0).abs() < 1e-14);
        assert!((power_integral(2.0, 0.0, 3.0) - 9.0).abs() < 1e-12);
        assert!((power_tail(-2.0, 4.0) - 0.25).abs() < 1e-14);
    }
}
