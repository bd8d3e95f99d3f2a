use alloc::format;
use alloc::vec;

use super::{dot, DualSolverResult, InnerProblem};
use crate::error::{Error, Result};
use crate::math;

const MAX_ITERATIONS: usize = 200;

/// Dual objective `g(lambda) = lambda rho + lambda log sum_s p(s) exp(-V(s)/lambda)`.
///
/// At `lambda = 0` the limit `-min V` is returned, the minimum taken over the
/// support of `p`. `sigma = -min_lambda g(lambda)`.
pub fn kl_objective(lambda: f64, p: &[f64], value: &[f64], radius: f64) -> f64 {
    let m = support_min(p, value);
    if lambda <= 0.0 {
        return -m;
    }
    let (l, _) = log_partition(p, value, m, lambda);
    -m + lambda * (radius + l)
}

fn support_min(p: &[f64], value: &[f64]) -> f64 {
    p.iter()
        .zip(value)
        .filter(|(&p, _)| p > 0.0)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min)
}

// log sum_s p(s) exp(-(V(s) - m)/lambda) and the tilted mean of V - m.
// With V - m >= 0 on the support the sum lies in [p(min states), 1].
fn log_partition(p: &[f64], value: &[f64], m: f64, lambda: f64) -> (f64, f64) {
    let mut z = 0.0;
    let mut first = 0.0;
    for (&p, &v) in p.iter().zip(value) {
        if p > 0.0 {
            let x = v - m;
            let w = p * math::exp(-x / lambda);
            z += w;
            first += w * x;
        }
    }
    (math::ln(z), first / z)
}

// Derivative and second derivative of G(lambda) = lambda (rho + L(lambda)).
fn derivatives(p: &[f64], value: &[f64], m: f64, radius: f64, lambda: f64) -> (f64, f64) {
    let mut z = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for (&p, &v) in p.iter().zip(value) {
        if p > 0.0 {
            let x = v - m;
            let w = p * math::exp(-x / lambda);
            z += w;
            first += w * x;
            second += w * x * x;
        }
    }
    let mean = first / z;
    let var = (second / z - mean * mean).max(0.0);
    let d1 = radius + math::ln(z) + mean / lambda;
    let d2 = var / (lambda * lambda * lambda);
    (d1, d2)
}

/// Unvalidated core of [`sigma_kl`]: returns `(sigma, lambda, iterations)`.
///
/// `p` may contain zeros; the problem is then restricted to its support.
pub(crate) fn sigma_kl_unchecked(p: &[f64], value: &[f64], radius: f64) -> (f64, f64, usize) {
    let m = support_min(p, value);
    let mut min_mass = 0.0;
    let mut top: f64 = 0.0;
    for (&p, &v) in p.iter().zip(value) {
        if p > 0.0 {
            if v == m {
                min_mass += p;
            }
            top = top.max(v - m);
        }
    }
    // G'(0+) = rho + log p(argmin); a nonnegative slope means lambda = 0 is optimal
    if top == 0.0 || radius + math::ln(min_mass) >= 0.0 {
        return (m, 0.0, 0);
    }

    // G' is increasing with G'(0+) < 0 <= G'(top / rho)
    let mut lo = 0.0;
    let mut hi = top / radius;
    // second-order expansion sigma ~ p.V - sqrt(2 rho Var_p V) puts the
    // minimizer near sqrt(Var / (2 rho))
    let (mut mean, mut second) = (0.0, 0.0);
    for (&p, &v) in p.iter().zip(value) {
        mean += p * (v - m);
        second += p * (v - m) * (v - m);
    }
    let guess = math::sqrt((second - mean * mean).max(0.0) / (2.0 * radius));
    let mut lambda = if guess > 0.0 && guess < hi { guess } else { 0.5 * hi };
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let (d1, d2) = derivatives(p, value, m, radius, lambda);
        // objective gap of a Newton step is about d1^2 / (2 d2)
        if d1 == 0.0 || (d2 > 0.0 && d1 * d1 <= 2e-16 * d2 * top) {
            break;
        }
        if d1 > 0.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let newton = if d2 > 0.0 { lambda - d1 / d2 } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - lambda).abs() <= 1e-16 * lambda {
            lambda = next;
            break;
        }
        lambda = next;
    }
    let (l, _) = log_partition(p, value, m, lambda);
    let g = lambda * (radius + l);
    let nominal = dot(p, value);
    let sigma = (m - g).clamp(m, nominal.max(m));
    (sigma, lambda, iterations)
}

/// Worst case over the KL ball `{q : KL(q || p) <= rho}`.
///
/// The dual is convex in `lambda`; its minimizer is found by Newton steps on
/// the derivative inside a shrinking bracket, with bisection whenever a step
/// would leave the bracket. The log-sum-exp is evaluated relative to `min V`
/// so no term overflows, and `lambda = 0` is handled through its analytic
/// limit `min V`.
pub fn sigma_kl(problem: &InnerProblem<'_>) -> Result<DualSolverResult> {
    if problem.radius <= 0.0 {
        return Err(Error::domain(format!(
            "KL radius must be positive, got {}",
            problem.radius
        )));
    }
    let p = problem.queried_row();
    let (sigma, lambda, iterations) = sigma_kl_unchecked(p, problem.value, problem.radius);
    let residual = if lambda > 0.0 {
        let m = support_min(p, problem.value);
        derivatives(p, problem.value, m, problem.radius, lambda).0.abs()
    } else {
        0.0
    };
    Ok(DualSolverResult {
        sigma,
        dual_point: vec![lambda],
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(p: &[f64], v: &[f64], rho: f64) -> DualSolverResult {
        sigma_kl(&InnerProblem::row(p, v, rho).unwrap()).unwrap()
    }

    // golden-section search on g over [0, hi]
    fn golden(p: &[f64], v: &[f64], rho: f64, hi: f64) -> f64 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, hi);
        for _ in 0..200 {
            let c = b - inv_phi * (b - a);
            let d = a + inv_phi * (b - a);
            if kl_objective(c, p, v, rho) < kl_objective(d, p, v, rho) {
                b = d;
            } else {
                a = c;
            }
        }
        let x = 0.5 * (a + b);
        -kl_objective(x, p, v, rho).min(kl_objective(0.0, p, v, rho))
    }

    #[test]
    fn constant_value() {
        for rho in [0.01, 0.5, 3.0] {
            assert_eq!(solve(&[0.2, 0.3, 0.5], &[1.5, 1.5, 1.5], rho).sigma, 1.5);
        }
    }

    #[test]
    fn large_radius_approaches_min() {
        let r = solve(&[0.5, 0.5], &[0.0, 1.0], 50.0);
        assert!(r.sigma.abs() < 1e-3);
    }

    #[test]
    fn lambda_zero_limit_is_exact_min() {
        // rho >= -log p(argmin) makes lambda = 0 optimal
        let r = solve(&[0.5, 0.5], &[0.25, 1.0], 0.7);
        assert_eq!(r.sigma, 0.25);
        assert_eq!(r.dual_point, vec![0.0]);
    }

    #[test]
    fn two_state_example_matches_golden_section() {
        let p = [0.5, 0.5];
        let v = [0.0, 1.0];
        let r = solve(&p, &v, 0.1);
        let g = golden(&p, &v, 0.1, 10.0);
        assert!((r.sigma - g).abs() < 1e-9, "{} vs {}", r.sigma, g);
        assert!(r.dual_point[0] > 0.0 && r.dual_point[0] <= 10.0);
    }

    #[test]
    fn zero_radius_rejected() {
        let prob = InnerProblem::row(&[0.5, 0.5], &[0.0, 1.0], 0.0).unwrap();
        assert_eq!(sigma_kl(&prob).unwrap_err().category(), "domain");
    }

    #[test]
    fn support_restriction() {
        // the zero-probability state cannot receive mass under a KL ball
        let p = [0.0, 0.5, 0.5];
        let v = [0.0, 1.0, 2.0];
        let prob = InnerProblem::empirical_row(&p, &v, 0.05).unwrap();
        let r = sigma_kl(&prob).unwrap();
        assert!(r.sigma > 1.0 && r.sigma < 1.5);
        let q = [0.5, 0.5];
        let g = golden(&q, &[1.0, 2.0], 0.05, 20.0);
        assert!((r.sigma - g).abs() < 1e-9);
    }

    #[test]
    fn objective_at_dual_point() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let v = [3.0, 0.2, 1.4, 2.2];
        let r = solve(&p, &v, 0.3);
        assert!((r.sigma + kl_objective(r.dual_point[0], &p, &v, 0.3)).abs() < 1e-12);
        assert!(r.dual_point[0] <= 3.0 / 0.3);
    }
}
