use alloc::vec;
use alloc::vec::Vec;

use super::{check_l1_radius, dot, DualSolverResult, InnerProblem};
use crate::error::Result;

/// Ascending order of a value vector, ties broken by lower index.
///
/// Every row of one backward-induction layer shares the same value vector,
/// so the sort is done once per layer.
#[derive(Debug, Clone)]
pub(crate) struct SortedValues {
    order: Vec<usize>,
    min: f64,
}

impl SortedValues {
    pub(crate) fn new(value: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..value.len()).collect();
        order.sort_by(|&a, &b| value[a].total_cmp(&value[b]));
        let min = value[order[0]];
        SortedValues { order, min }
    }
}

/// Dual objective `g(eta) = sum_s p(s) (eta - V(s))_+ - eta + (rho/2) (eta - min V)_+`.
///
/// `sigma = -min_eta g(eta)`.
pub fn l1_sa_objective(eta: f64, p: &[f64], value: &[f64], radius: f64) -> f64 {
    let min_v = value.iter().copied().fold(f64::INFINITY, f64::min);
    let hinge: f64 = p
        .iter()
        .zip(value)
        .map(|(&p, &v)| p * (eta - v).max(0.0))
        .sum();
    hinge - eta + 0.5 * radius * (eta - min_v).max(0.0)
}

/// Breakpoint search on a pre-sorted value vector. Returns `(sigma, eta)`.
///
/// `g` is convex and piecewise linear with kinks only at the entries of
/// `value`, and it is decreasing below `min V` and non-decreasing above
/// `max V`, so its minimum sits on one of the entries.
pub(crate) fn sigma_l1_sa_sorted(
    p: &[f64],
    value: &[f64],
    sorted: &SortedValues,
    radius: f64,
) -> (f64, f64) {
    let half = 0.5 * radius;
    let min_v = sorted.min;
    let order = &sorted.order;
    let n = order.len();
    // mass and first moment of the states strictly below the current breakpoint
    let mut mass = 0.0;
    let mut moment = 0.0;
    let mut best_g = f64::INFINITY;
    let mut best_eta = min_v;
    let mut i = 0;
    while i < n {
        let x = value[order[i]];
        let g = x * mass - moment - x + half * (x - min_v);
        if g < best_g {
            best_g = g;
            best_eta = x;
        }
        while i < n && value[order[i]] == x {
            let s = order[i];
            mass += p[s];
            moment += p[s] * value[s];
            i += 1;
        }
    }
    // `moment` now holds p . V; keep sigma inside [min V, p . V] despite rounding
    let sigma = (-best_g).clamp(min_v, moment.max(min_v));
    (sigma, best_eta)
}

/// Worst case over the L1 ball of radius `rho` around the queried row.
pub fn sigma_l1_sa(problem: &InnerProblem<'_>) -> Result<DualSolverResult> {
    check_l1_radius(problem.radius)?;
    let p = problem.queried_row();
    let value = problem.value;
    let sorted = SortedValues::new(value);
    let (sigma, eta) = sigma_l1_sa_sorted(p, value, &sorted, problem.radius);
    Ok(DualSolverResult {
        sigma,
        dual_point: vec![eta],
        iterations: value.len(),
        residual: 0.0,
    })
}

/// Exact minimizer of `q . V` over `{q in simplex : |q - p|_1 <= rho}`.
///
/// Moves `min(rho/2, 1 - p(s_min))` mass onto the lowest-value state and
/// takes the same amount from the highest-value states first. Ties go to the
/// lowest index. Zero entries in `p` are allowed.
pub fn greedy_worst_case(p: &[f64], value: &[f64], radius: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    let n = value.len();
    let mut s_min = 0;
    for s in 1..n {
        if value[s] < value[s_min] {
            s_min = s;
        }
    }
    let budget = (0.5 * radius).min(1.0 - p[s_min]).max(0.0);
    q[s_min] += budget;
    let mut donors: Vec<usize> = (0..n).filter(|&s| s != s_min).collect();
    // decreasing value, stable so equal values keep index order
    donors.sort_by(|&a, &b| value[b].total_cmp(&value[a]));
    let mut remaining = budget;
    for s in donors {
        if remaining <= 0.0 {
            break;
        }
        let take = remaining.min(q[s]);
        q[s] -= take;
        remaining -= take;
    }
    q
}

/// Primal oracle for [`sigma_l1_sa`].
pub fn sigma_l1_sa_oracle(problem: &InnerProblem<'_>) -> Result<f64> {
    check_l1_radius(problem.radius)?;
    let q = greedy_worst_case(problem.queried_row(), problem.value, problem.radius);
    Ok(dot(&q, problem.value))
}
