//! Worst-case expectation `sigma(V) = min_{q in P} q . V` over an uncertainty
//! set around a nominal row.
//!
//! Each set is solved through a low-dimensional convex dual:
//!
//! * L1 per (s, a): a piecewise-linear function of one multiplier `eta`,
//!   minimized exactly over its breakpoints ([`sigma_l1_sa`]).
//! * L1 per state: an `A`-dimensional multiplier, minimized by projected
//!   subgradient descent followed by exact coordinate minimization
//!   ([`sigma_l1_s`]).
//! * KL per (s, a): a smooth convex function of the temperature `lambda`
//!   ([`sigma_kl`]).
//!
//! The `*_oracle` functions solve the primal problem directly and exist to
//! cross-check the duals.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mdp::{UncertaintyKind, UncertaintySet, ROW_SUM_TOL};

mod kl;
mod l1_s;
mod l1_sa;

pub use kl::{kl_objective, sigma_kl};
pub use l1_s::{l1_s_objective, sigma_l1_s, sigma_l1_s_oracle, sigma_l1_s_warm, SubgradientConfig};
pub use l1_sa::{greedy_worst_case, l1_sa_objective, sigma_l1_sa, sigma_l1_sa_oracle};
pub(crate) use l1_sa::{sigma_l1_sa_sorted, SortedValues};
pub(crate) use kl::sigma_kl_unchecked;

/// Outcome of a dual solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolverResult {
    /// The worst-case expectation.
    pub sigma: f64,
    /// Optimal multipliers: `[eta]` for L1 per (s, a), `[eta_0, .., eta_{A-1}]`
    /// for L1 per state, `[lambda]` for KL.
    pub dual_point: Vec<f64>,
    pub iterations: usize,
    /// Final optimality-gap estimate (zero for the exact breakpoint search).
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Nominal<'a> {
    Row(&'a [f64]),
    /// Row-major `A x S` block plus the queried action.
    Block { rows: &'a [f64], action: usize },
}

/// Arguments of one inner minimization.
///
/// Nominal rows built with [`InnerProblem::row`] / [`InnerProblem::block`]
/// must be strictly positive. Empirical rows (counts-based estimates) may
/// contain zeros and are built with the `empirical_*` constructors; the L1
/// duals stay exact on them and the KL dual restricts itself to the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProblem<'a> {
    pub(crate) nominal: Nominal<'a>,
    pub(crate) value: &'a [f64],
    pub(crate) radius: f64,
}

impl<'a> InnerProblem<'a> {
    pub fn row(p: &'a [f64], value: &'a [f64], radius: f64) -> Result<Self> {
        Self::checked(Nominal::Row(p), value, radius, true)
    }

    pub fn block(rows: &'a [f64], action: usize, value: &'a [f64], radius: f64) -> Result<Self> {
        Self::checked(Nominal::Block { rows, action }, value, radius, true)
    }

    pub fn empirical_row(p: &'a [f64], value: &'a [f64], radius: f64) -> Result<Self> {
        Self::checked(Nominal::Row(p), value, radius, false)
    }

    pub fn empirical_block(
        rows: &'a [f64],
        action: usize,
        value: &'a [f64],
        radius: f64,
    ) -> Result<Self> {
        Self::checked(Nominal::Block { rows, action }, value, radius, false)
    }

    fn checked(nominal: Nominal<'a>, value: &'a [f64], radius: f64, strict: bool) -> Result<Self> {
        let n = value.len();
        if n == 0 {
            return Err(Error::config("empty value vector"));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("value vector has a non-finite entry"));
        }
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::domain(format!("radius must be finite and >= 0, got {radius}")));
        }
        let rows = match nominal {
            Nominal::Row(p) => p,
            Nominal::Block { rows, action } => {
                if rows.is_empty() || rows.len() % n != 0 {
                    return Err(Error::config("block length is not a multiple of the state count"));
                }
                if action >= rows.len() / n {
                    return Err(Error::config(format!("queried action {action} out of range")));
                }
                rows
            }
        };
        if rows.len() % n != 0 || rows.is_empty() {
            return Err(Error::config(format!(
                "nominal row has length {}, value has length {n}",
                rows.len()
            )));
        }
        for row in rows.chunks(n) {
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 || (strict && p <= 0.0) {
                    return Err(Error::domain(format!(
                        "nominal entry {p} is not {}",
                        if strict { "strictly positive" } else { "a probability" }
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e3 * ROW_SUM_TOL {
                return Err(Error::domain(format!("nominal row sums to {sum}")));
            }
        }
        Ok(InnerProblem {
            nominal,
            value,
            radius,
        })
    }

    pub fn value(&self) -> &'a [f64] {
        self.value
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_states(&self) -> usize {
        self.value.len()
    }

    pub fn num_actions(&self) -> usize {
        match self.nominal {
            Nominal::Row(_) => 1,
            Nominal::Block { rows, .. } => rows.len() / self.value.len(),
        }
    }

    /// The row whose expectation is being minimized.
    pub fn queried_row(&self) -> &'a [f64] {
        match self.nominal {
            Nominal::Row(p) => p,
            Nominal::Block { rows, action } => {
                let n = self.value.len();
                &rows[action * n..(action + 1) * n]
            }
        }
    }

    /// `p . V` for the queried row.
    pub fn nominal_expectation(&self) -> f64 {
        dot(self.queried_row(), self.value)
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::domain(format!("radius must be finite and >= 0, got {radius}")));
        }
        self.radius = radius;
        Ok(self)
    }
}

#[inline]
pub(crate) fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn check_l1_radius(radius: f64) -> Result<()> {
    if radius > 2.0 {
        return Err(Error::domain(format!(
            "L1 radius {radius} exceeds the simplex diameter 2"
        )));
    }
    Ok(())
}

/// Routes a problem to the solver matching `set`. A zero radius returns the
/// nominal expectation without solving anything.
pub fn sigma_dispatch(set: &UncertaintySet, problem: &InnerProblem<'_>) -> Result<f64> {
    if set.radius != problem.radius {
        return Err(Error::config(format!(
            "set radius {} differs from problem radius {}",
            set.radius, problem.radius
        )));
    }
    if set.is_nominal() {
        return Ok(problem.nominal_expectation());
    }
    let result = match set.kind {
        UncertaintyKind::L1Sa => sigma_l1_sa(problem)?,
        UncertaintyKind::L1S => sigma_l1_s(problem)?,
        UncertaintyKind::Kl => sigma_kl(problem)?,
    };
    Ok(result.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_radius_returns_nominal_expectation() {
        let p = [0.3, 0.7];
        let v = [2.0, 4.0];
        let prob = InnerProblem::row(&p, &v, 0.0).unwrap();
        for kind in [UncertaintyKind::L1Sa, UncertaintyKind::L1S, UncertaintyKind::Kl] {
            let set = UncertaintySet::nominal(kind);
            assert!((sigma_dispatch(&set, &prob).unwrap() - 3.4).abs() < 1e-15);
        }
    }

    #[test]
    fn dispatch_matches_direct_solver() {
        let block = [0.5, 0.5, 0.5, 0.5];
        let v = [0.0, 1.0];
        let prob = InnerProblem::block(&block, 0, &v, 0.5).unwrap();
        let set = UncertaintySet::l1_s(0.5).unwrap();
        let via_dispatch = sigma_dispatch(&set, &prob).unwrap();
        let direct = sigma_l1_s(&prob).unwrap().sigma;
        assert_eq!(via_dispatch, direct);
    }

    #[test]
    fn strict_rows_reject_zero_entries() {
        let p = [1.0, 0.0];
        let v = [0.0, 1.0];
        assert_eq!(InnerProblem::row(&p, &v, 0.1).unwrap_err().category(), "domain");
        assert!(InnerProblem::empirical_row(&p, &v, 0.1).is_ok());
    }

    #[test]
    fn shape_errors() {
        let p = [0.5, 0.5];
        let v = [0.0, 1.0, 2.0];
        assert_eq!(InnerProblem::row(&p, &v, 0.1).unwrap_err().category(), "config");
        let block = [0.5, 0.5, 0.5, 0.5];
        let v2 = [0.0, 1.0];
        assert!(InnerProblem::block(&block, 2, &v2, 0.1).is_err());
    }

    #[test]
    fn radius_mismatch_rejected() {
        let p = [0.5, 0.5];
        let v = [0.0, 1.0];
        let prob = InnerProblem::row(&p, &v, 0.2).unwrap();
        assert!(sigma_dispatch(&UncertaintySet::l1_sa(0.3).unwrap(), &prob).is_err());
    }
}
