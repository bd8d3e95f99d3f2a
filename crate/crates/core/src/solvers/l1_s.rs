use alloc::vec;
use alloc::vec::Vec;

use super::{check_l1_radius, dot, greedy_worst_case, DualSolverResult, InnerProblem, Nominal};
use crate::error::{Error, Result};
use crate::math;

/// Stopping rule of the projected subgradient phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientConfig {
    pub max_iterations: usize,
    /// Stop once the best objective improved by at most `tolerance` over the
    /// last `window` iterations.
    pub window: usize,
    pub tolerance: f64,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        SubgradientConfig {
            max_iterations: 5000,
            window: 50,
            tolerance: 1e-12,
        }
    }
}

// Problem in shifted coordinates: V' = V - min V, so every offset is >= 0 and
// the minimizer lives in the box [0, V'_max]^A.
struct Shifted<'a> {
    rows: &'a [f64],
    value: Vec<f64>,
    action: usize,
    actions: usize,
    states: usize,
    // A * rho / 2
    weight: f64,
    upper: f64,
}

impl Shifted<'_> {
    #[inline]
    fn offset(&self, j: usize, s: usize) -> f64 {
        if j == self.action {
            self.value[s]
        } else {
            0.0
        }
    }

    #[inline]
    fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.states..(j + 1) * self.states]
    }

    // Largest hinge over coordinate j alone: every coordinate has a zero
    // offset (min V' = 0), so this is (eta_j)_+ for all j.
    #[inline]
    fn coordinate_peak(x: f64) -> f64 {
        x.max(0.0)
    }

    fn objective(&self, eta: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut peak: f64 = 0.0;
        for j in 0..self.actions {
            let row = self.row(j);
            total -= eta[j];
            for s in 0..self.states {
                total += row[s] * (eta[j] - self.offset(j, s)).max(0.0);
            }
            peak = peak.max(Self::coordinate_peak(eta[j]));
        }
        total + self.weight * peak
    }

    // One subgradient of the objective.
    fn subgradient(&self, eta: &[f64], grad: &mut [f64]) {
        let mut peak = 0.0;
        let mut peak_at = None;
        for j in 0..self.actions {
            let row = self.row(j);
            let mut g = -1.0;
            for s in 0..self.states {
                if eta[j] > self.offset(j, s) {
                    g += row[s];
                }
            }
            grad[j] = g;
            let c = Self::coordinate_peak(eta[j]);
            if c > peak {
                peak = c;
                peak_at = Some(j);
            }
        }
        if let Some(j) = peak_at {
            grad[j] += self.weight;
        }
    }

    // Exact minimization over coordinate j with the others fixed. The
    // restriction is convex piecewise linear, so checking its kinks and the
    // box ends finds the minimum; ties keep the smallest coordinate.
    fn minimize_coordinate(&self, eta: &mut [f64], j: usize) {
        let mut others: f64 = 0.0;
        for k in 0..self.actions {
            if k != j {
                others = others.max(Self::coordinate_peak(eta[k]));
            }
        }
        let row = self.row(j);
        let eval = |x: f64| -> f64 {
            let mut t = -x;
            for s in 0..self.states {
                t += row[s] * (x - self.offset(j, s)).max(0.0);
            }
            t + self.weight * others.max(Self::coordinate_peak(x))
        };
        let mut best_x = 0.0;
        let mut best = eval(0.0);
        let mut consider = |x: f64| {
            if (0.0..=self.upper).contains(&x) {
                let f = eval(x);
                // rounding in the linear parts must not pin x above a tie
                let tie = 1e-13 * (1.0 + best.abs());
                if f < best - tie || (f <= best + tie && x < best_x) {
                    best = f;
                    best_x = x;
                }
            }
        };
        consider(self.upper);
        consider(others);
        for s in 0..self.states {
            consider(self.offset(j, s));
        }
        eta[j] = best_x;
    }

    // Caps every coordinate at a common level t, minimized exactly over the
    // kinks of t -> g(min(eta, t)). This lowers the peak term jointly, which
    // single-coordinate moves cannot do when two coordinates share the peak.
    fn minimize_cap(&self, eta: &mut [f64]) {
        let capped = |t: f64| -> Vec<f64> { eta.iter().map(|&x| x.min(t)).collect() };
        let mut best = self.objective(eta);
        let mut best_t = None;
        let mut consider = |t: f64| {
            let f = self.objective(&capped(t));
            if f < best - 1e-13 * (1.0 + best.abs()) {
                best = f;
                best_t = Some(t);
            }
        };
        consider(0.0);
        for &x in eta.iter() {
            consider(x);
        }
        for s in 0..self.states {
            consider(self.value[s]);
        }
        if let Some(t) = best_t {
            let c = capped(t);
            eta.copy_from_slice(&c);
        }
    }
}

/// Dual objective of the per-state L1 set in original coordinates:
///
/// `g(eta) = -sum_a eta_a + sum_{s,a} P(s|a) (eta_a - 1{a=a*} V(s))_+
///           + (A rho / 2) max_{s,a} (eta_a - 1{a=a*} V(s))_+`
///
/// where `a*` is the queried action and `rows` is the `A x S` block.
pub fn l1_s_objective(eta: &[f64], rows: &[f64], action: usize, value: &[f64], radius: f64) -> f64 {
    let states = value.len();
    let actions = rows.len() / states;
    let mut total = 0.0;
    let mut peak: f64 = 0.0;
    for j in 0..actions {
        total -= eta[j];
        for s in 0..states {
            let offset = if j == action { value[s] } else { 0.0 };
            let hinge = (eta[j] - offset).max(0.0);
            total += rows[j * states + s] * hinge;
            peak = peak.max(hinge);
        }
    }
    total + 0.5 * actions as f64 * radius * peak
}

/// [`sigma_l1_s_warm`] from a cold start with the default configuration.
pub fn sigma_l1_s(problem: &InnerProblem<'_>) -> Result<DualSolverResult> {
    sigma_l1_s_warm(problem, None, &SubgradientConfig::default())
}

/// Worst case over the per-state L1 set with shared budget `A * rho`.
///
/// Projected subgradient descent with step `D / (G sqrt(t))`, where
/// `D = max(V) sqrt(A)` and `G = A (4 + rho) / 2` is the objective's
/// Lipschitz constant, then exact coordinate minimization sweeps until no
/// sweep improves the objective. `warm_start` is a previous dual point in
/// original coordinates.
pub fn sigma_l1_s_warm(
    problem: &InnerProblem<'_>,
    warm_start: Option<&[f64]>,
    config: &SubgradientConfig,
) -> Result<DualSolverResult> {
    check_l1_radius(problem.radius)?;
    let (rows, action) = match problem.nominal {
        Nominal::Row(p) => (p, 0),
        Nominal::Block { rows, action } => (rows, action),
    };
    let states = problem.value.len();
    let actions = rows.len() / states;
    let min_v = problem.value.iter().copied().fold(f64::INFINITY, f64::min);
    let value: Vec<f64> = problem.value.iter().map(|v| v - min_v).collect();
    let upper = value.iter().copied().fold(0.0, f64::max);
    let shifted = Shifted {
        rows,
        value,
        action,
        actions,
        states,
        weight: 0.5 * actions as f64 * problem.radius,
        upper,
    };
    let to_shifted = |eta: &[f64]| -> Vec<f64> {
        (0..actions)
            .map(|j| {
                let x = if j == action { eta[j] - min_v } else { eta[j] };
                x.clamp(0.0, upper)
            })
            .collect()
    };

    let mut eta = match warm_start {
        Some(w) if w.len() == actions && w.iter().all(|x| x.is_finite()) => to_shifted(w),
        Some(_) => return Err(Error::config("warm start has the wrong length")),
        None => {
            let mut e = vec![0.0; actions];
            e[action] = 0.5 * upper;
            e
        }
    };

    let mut best = shifted.objective(&eta);
    let mut best_eta = eta.clone();
    let mut history = Vec::with_capacity(config.max_iterations.min(8192) + 1);
    history.push(best);
    let mut grad = vec![0.0; actions];
    let diameter = upper * math::sqrt(actions as f64);
    let lipschitz = 0.5 * actions as f64 * (4.0 + problem.radius);
    let mut iterations = 0;
    if upper > 0.0 {
        for t in 1..=config.max_iterations {
            iterations = t;
            shifted.subgradient(&eta, &mut grad);
            let step = diameter / (lipschitz * math::sqrt(t as f64));
            for j in 0..actions {
                eta[j] = (eta[j] - step * grad[j]).clamp(0.0, upper);
            }
            let f = shifted.objective(&eta);
            if f < best {
                best = f;
                best_eta.copy_from_slice(&eta);
            }
            history.push(best);
            if t >= config.window && history[t - config.window] - best <= config.tolerance {
                break;
            }
        }
    }

    // coordinate polish: other actions first, then the queried one
    let mut eta = best_eta;
    let mut residual = 0.0;
    for _ in 0..100 {
        let before = shifted.objective(&eta);
        for j in (0..actions).filter(|&j| j != action) {
            shifted.minimize_coordinate(&mut eta, j);
        }
        shifted.minimize_coordinate(&mut eta, action);
        shifted.minimize_cap(&mut eta);
        let after = shifted.objective(&eta);
        iterations += 1;
        residual = (before - after).max(0.0);
        if residual <= 1e-15 {
            break;
        }
    }
    let best = shifted.objective(&eta);
    let nominal = dot(problem.queried_row(), problem.value);
    let sigma = (min_v - best).clamp(min_v, nominal.max(min_v));
    let mut dual_point = eta;
    dual_point[action] += min_v;
    Ok(DualSolverResult {
        sigma,
        dual_point,
        iterations,
        residual,
    })
}

/// Primal oracle for [`sigma_l1_s`].
///
/// Only the queried action's row enters the objective and moving any other
/// row never helps, so the whole budget `A * rho` goes to that row: the
/// answer is the per-(s, a) greedy solution at radius `min(A rho, 2)`.
pub fn sigma_l1_s_oracle(problem: &InnerProblem<'_>) -> Result<f64> {
    check_l1_radius(problem.radius)?;
    let radius = (problem.num_actions() as f64 * problem.radius).min(2.0);
    let q = greedy_worst_case(problem.queried_row(), problem.value, radius);
    Ok(dot(&q, problem.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::sigma_l1_sa;

    #[test]
    fn zero_radius_is_nominal() {
        let block = [0.2, 0.8, 0.6, 0.4];
        let v = [1.0, 3.0];
        let r = sigma_l1_s(&InnerProblem::block(&block, 1, &v, 0.0).unwrap()).unwrap();
        assert!((r.sigma - 1.8).abs() < 1e-12);
    }

    #[test]
    fn single_action_matches_sa_dual() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let v = [4.0, 0.5, 2.0, 1.0];
        for rho in [0.0, 0.1, 0.35, 0.9, 1.7, 2.0] {
            let prob = InnerProblem::row(&p, &v, rho).unwrap();
            let s = sigma_l1_s(&prob).unwrap().sigma;
            let sa = sigma_l1_sa(&prob).unwrap().sigma;
            assert!((s - sa).abs() < 1e-8, "rho={rho}: {s} vs {sa}");
        }
    }

    #[test]
    fn two_by_two_instance() {
        // budget A rho = 1 lets the queried row move all its mass onto V = 0
        let block = [0.5, 0.5, 0.5, 0.5];
        let v = [0.0, 1.0];
        let prob = InnerProblem::block(&block, 0, &v, 0.5).unwrap();
        let oracle = sigma_l1_s_oracle(&prob).unwrap();
        assert!(oracle.abs() < 1e-15);
        let dual = sigma_l1_s(&prob).unwrap();
        assert!((dual.sigma - oracle).abs() < 1e-6);
        assert!(dual.dual_point.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn large_budget_reaches_min() {
        let block = [0.3, 0.3, 0.4, 0.1, 0.1, 0.8];
        let v = [2.0, 0.5, 3.0];
        let prob = InnerProblem::block(&block, 1, &v, 1.0).unwrap();
        assert!((sigma_l1_s_oracle(&prob).unwrap() - 0.5).abs() < 1e-15);
        assert!((sigma_l1_s(&prob).unwrap().sigma - 0.5).abs() < 1e-10);
    }

    #[test]
    fn objective_value_at_dual_point() {
        let block = [0.3, 0.3, 0.4, 0.1, 0.1, 0.8];
        let v = [2.0, 0.5, 3.0];
        let prob = InnerProblem::block(&block, 1, &v, 0.2).unwrap();
        let r = sigma_l1_s(&prob).unwrap();
        let g = l1_s_objective(&r.dual_point, &block, 1, &v, 0.2);
        assert!((r.sigma + g).abs() < 1e-10);
    }

    #[test]
    fn warm_start_gives_same_answer() {
        let block = [0.3, 0.3, 0.4, 0.1, 0.1, 0.8];
        let v = [2.0, 0.5, 3.0];
        let prob = InnerProblem::block(&block, 0, &v, 0.3).unwrap();
        let cold = sigma_l1_s(&prob).unwrap();
        let warm =
            sigma_l1_s_warm(&prob, Some(&cold.dual_point), &SubgradientConfig::default()).unwrap();
        assert!((cold.sigma - warm.sigma).abs() < 1e-12);
        assert!(warm.residual <= 1e-8);
    }
}
