//! Visitation counts, empirical estimates and exploration bonuses.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ln, sqrt};
use crate::mdp::{Dims, Kernel, Trajectory, UncertaintyKind};

/// Counts-based model of rewards and transitions.
///
/// Rows of cells that were never visited are uniform, which keeps every
/// empirical row a valid distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    dims: Dims,
    counts: Vec<u64>,
    reward_sum: Vec<f64>,
    // (cell, s') flattened
    transition_counts: Vec<u64>,
}

impl EmpiricalModel {
    pub fn new(dims: Dims) -> Self {
        EmpiricalModel {
            dims,
            counts: vec![0; dims.num_cells()],
            reward_sum: vec![0.0; dims.num_cells()],
            transition_counts: vec![0; dims.num_cells() * dims.states],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.counts[self.dims.cell(h, s, a)]
    }

    pub fn reward_sum(&self, h: usize, s: usize, a: usize) -> f64 {
        self.reward_sum[self.dims.cell(h, s, a)]
    }

    /// Next-state counts of one cell.
    #[inline]
    pub fn transition_counts(&self, h: usize, s: usize, a: usize) -> &[u64] {
        let n = self.dims.states;
        let c = self.dims.cell(h, s, a);
        &self.transition_counts[c * n..(c + 1) * n]
    }

    /// `reward_sum / max(N, 1)`.
    #[inline]
    pub fn reward_hat(&self, h: usize, s: usize, a: usize) -> f64 {
        let c = self.dims.cell(h, s, a);
        self.reward_sum[c] / self.counts[c].max(1) as f64
    }

    /// Writes the empirical row of one cell into `out`.
    #[inline]
    pub fn fill_kernel_row(&self, h: usize, s: usize, a: usize, out: &mut [f64]) {
        let n = self.count(h, s, a);
        if n == 0 {
            out.fill(1.0 / self.dims.states as f64);
        } else {
            let inv = 1.0 / n as f64;
            for (o, &c) in out.iter_mut().zip(self.transition_counts(h, s, a)) {
                *o = c as f64 * inv;
            }
        }
    }

    pub fn kernel_row(&self, h: usize, s: usize, a: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.dims.states];
        self.fill_kernel_row(h, s, a, &mut row);
        row
    }

    /// The full empirical kernel `P_hat`.
    pub fn empirical_kernel(&self) -> Kernel {
        let n = self.dims.states;
        let mut data = vec![0.0; self.dims.num_cells() * n];
        for h in 0..self.dims.horizon {
            for s in 0..n {
                for a in 0..self.dims.actions {
                    let c = self.dims.cell(h, s, a);
                    self.fill_kernel_row(h, s, a, &mut data[c * n..(c + 1) * n]);
                }
            }
        }
        Kernel::from_rows(self.dims, data).expect("empirical rows are distributions")
    }

    /// Adds one trajectory: one count per visited `(h, s, a)`.
    pub fn update(&mut self, trajectory: &Trajectory) -> Result<()> {
        let d = self.dims;
        for step in &trajectory.steps {
            if step.h >= d.horizon
                || step.state >= d.states
                || step.action >= d.actions
                || step.next_state >= d.states
            {
                return Err(Error::config(format!("trajectory step {step:?} outside model shape")));
            }
        }
        for step in &trajectory.steps {
            let c = d.cell(step.h, step.state, step.action);
            self.counts[c] += 1;
            self.reward_sum[c] += step.reward;
            self.transition_counts[c * d.states + step.next_state] += 1;
        }
        Ok(())
    }

    /// Cells with at least one visit, in `(h, s, a)` order.
    pub fn visited_cells(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let d = self.dims;
        (0..d.num_cells())
            .filter(move |&c| self.counts[c] > 0)
            .map(move |c| (c / (d.states * d.actions), (c / d.actions) % d.states, c % d.actions))
    }

    /// Overwrites one cell, as when restoring a checkpoint.
    pub fn set_cell(
        &mut self,
        h: usize,
        s: usize,
        a: usize,
        reward_sum: f64,
        transitions: &[u64],
    ) -> Result<()> {
        let d = self.dims;
        if h >= d.horizon || s >= d.states || a >= d.actions {
            return Err(Error::config(format!("cell ({h}, {s}, {a}) outside model shape")));
        }
        if transitions.len() != d.states {
            return Err(Error::config(format!(
                "cell has {} transition counts, expected {}",
                transitions.len(),
                d.states
            )));
        }
        let n: u64 = transitions.iter().sum();
        if !reward_sum.is_finite() || reward_sum < 0.0 || reward_sum > n as f64 {
            return Err(Error::config(format!(
                "reward sum {reward_sum} inconsistent with {n} visits"
            )));
        }
        let c = d.cell(h, s, a);
        self.counts[c] = n;
        self.reward_sum[c] = reward_sum;
        self.transition_counts[c * d.states..(c + 1) * d.states].copy_from_slice(transitions);
        Ok(())
    }
}

/// Constants shared by the bonus formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusParams {
    /// Total number of episodes `K`.
    pub episodes: usize,
    /// Failure probability `delta`.
    pub delta: f64,
    /// Lower bound `c` on the nominal kernel entries, used by the KL bonus.
    pub kl_min_prob: Option<f64>,
}

impl BonusParams {
    pub fn new(episodes: usize, delta: f64) -> Result<Self> {
        let params = BonusParams {
            episodes,
            delta,
            kl_min_prob: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// `delta = 1/H`; for `H = 1` this would leave `(0, 1)`, so `1/2` is used.
    pub fn with_default_delta(episodes: usize, horizon: usize) -> Result<Self> {
        let delta = if horizon >= 2 { 1.0 / horizon as f64 } else { 0.5 };
        Self::new(episodes, delta)
    }

    pub fn with_kl_min_prob(mut self, c: f64) -> Result<Self> {
        self.kl_min_prob = Some(c);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episode count K must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(c) = self.kl_min_prob {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::domain(format!("c must lie in (0, 1], got {c}")));
            }
        }
        Ok(())
    }
}

/// Multipliers applied to the three bonus terms. All ones reproduces the
/// formulas as stated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusScale {
    /// Reward-concentration term `sqrt(2 log(3SAH^2K/delta) / N)`.
    pub reward: f64,
    /// Transition term (the one carrying `H` and `S`).
    pub transition: f64,
    /// The `1/sqrt(K)` term.
    pub tail: f64,
}

impl BonusScale {
    pub const UNIT: BonusScale = BonusScale {
        reward: 1.0,
        transition: 1.0,
        tail: 1.0,
    };

    pub const ZERO: BonusScale = BonusScale {
        reward: 0.0,
        transition: 0.0,
        tail: 0.0,
    };

    pub fn uniform(c: f64) -> Self {
        BonusScale {
            reward: c,
            transition: c,
            tail: c,
        }
    }
}

impl Default for BonusScale {
    fn default() -> Self {
        Self::UNIT
    }
}

/// The three additive terms of a bonus at a given count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusTerms {
    pub reward: f64,
    pub transition: f64,
    pub tail: f64,
}

impl BonusTerms {
    pub fn total(&self) -> f64 {
        self.reward + self.transition + self.tail
    }

    pub fn scaled(&self, scale: &BonusScale) -> f64 {
        scale.reward * self.reward + scale.transition * self.transition + scale.tail * self.tail
    }
}

fn check_sizes(n: u64, dims: Dims) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("bonus needs a visit count of at least 1"));
    }
    if dims.states == 0 || dims.actions == 0 || dims.horizon == 0 {
        return Err(Error::config("bonus needs positive S, A, H"));
    }
    Ok(())
}

fn reward_term(n: f64, s: f64, a: f64, h: f64, k: f64, delta: f64) -> f64 {
    sqrt(2.0 * ln(3.0 * s * a * h * h * k / delta) / n)
}

/// Terms of the bonus for `kind` at visit count `n`.
pub fn bonus_terms(
    kind: UncertaintyKind,
    n: u64,
    params: &BonusParams,
    dims: Dims,
    radius: f64,
) -> Result<BonusTerms> {
    check_sizes(n, dims)?;
    params.validate()?;
    let nf = n as f64;
    let (s, a, h) = (dims.states as f64, dims.actions as f64, dims.horizon as f64);
    let k = params.episodes as f64;
    let delta = params.delta;
    let reward = reward_term(nf, s, a, h, k, delta);
    let tail = 1.0 / sqrt(k);
    let transition = match kind {
        UncertaintyKind::L1Sa => {
            h * sqrt(4.0 * s * ln(3.0 * s * a * h * h * k * sqrt(k) * (4.0 + radius) / delta) / nf)
        }
        UncertaintyKind::L1S => {
            a * h
                * sqrt(
                    4.0 * s * a * ln(3.0 * s * a * a * h * h * k * sqrt(k) * (4.0 + radius) / delta)
                        / nf,
                )
        }
        UncertaintyKind::Kl => {
            if radius <= 0.0 {
                return Err(Error::domain("KL bonus needs a positive radius"));
            }
            let c = params
                .kl_min_prob
                .ok_or_else(|| Error::config("KL bonus needs the minimum kernel entry c"))?;
            let h4 = h * h * h * h;
            (2.0 * h / (radius * c))
                * sqrt(4.0 * s * ln(8.0 * s * a * h4 * k * k / (delta * radius)) / nf)
        }
    };
    Ok(BonusTerms {
        reward,
        transition,
        tail,
    })
}

/// Bonus for the per-(s, a) L1 set.
pub fn bonus_l1_sa(n: u64, params: &BonusParams, dims: Dims, radius: f64) -> Result<f64> {
    Ok(bonus_terms(UncertaintyKind::L1Sa, n, params, dims, radius)?.total())
}

/// Bonus for the per-state L1 set.
pub fn bonus_l1_s(n: u64, params: &BonusParams, dims: Dims, radius: f64) -> Result<f64> {
    Ok(bonus_terms(UncertaintyKind::L1S, n, params, dims, radius)?.total())
}

/// Bonus for the KL set; needs `params.kl_min_prob`.
pub fn bonus_kl(n: u64, params: &BonusParams, dims: Dims, radius: f64) -> Result<f64> {
    Ok(bonus_terms(UncertaintyKind::Kl, n, params, dims, radius)?.total())
}

/// Bonus as a function of the count: `coef / sqrt(N) + tail`, with the
/// count floored at 1. Built once per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BonusSchedule {
    coef: f64,
    tail: f64,
}

impl BonusSchedule {
    pub(crate) fn new(
        kind: UncertaintyKind,
        params: &BonusParams,
        scale: &BonusScale,
        dims: Dims,
        radius: f64,
    ) -> Result<Self> {
        let t = bonus_terms(kind, 1, params, dims, radius)?;
        Ok(BonusSchedule {
            coef: scale.reward * t.reward + scale.transition * t.transition,
            tail: scale.tail * t.tail,
        })
    }

    pub(crate) fn zero() -> Self {
        BonusSchedule {
            coef: 0.0,
            tail: 0.0,
        }
    }

    #[inline]
    pub(crate) fn at(&self, n: u64) -> f64 {
        self.coef / sqrt(n.max(1) as f64) + self.tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Step;

    fn dims() -> Dims {
        Dims::new(3, 2, 2).unwrap()
    }

    #[test]
    fn single_observation() {
        let mut m = EmpiricalModel::new(dims());
        let t = Trajectory {
            steps: vec![Step {
                h: 1,
                state: 2,
                action: 1,
                reward: 1.0,
                next_state: 0,
            }],
        };
        m.update(&t).unwrap();
        assert_eq!(m.count(1, 2, 1), 1);
        assert_eq!(m.reward_hat(1, 2, 1), 1.0);
        assert_eq!(m.kernel_row(1, 2, 1), vec![1.0, 0.0, 0.0]);
        m.update(&t).unwrap();
        assert_eq!(m.count(1, 2, 1), 2);
        assert_eq!(m.count(0, 2, 1), 0);
        assert_eq!(m.kernel_row(0, 0, 0), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn update_rejects_bad_steps() {
        let mut m = EmpiricalModel::new(dims());
        let t = Trajectory {
            steps: vec![Step {
                h: 0,
                state: 3,
                action: 0,
                reward: 0.0,
                next_state: 0,
            }],
        };
        assert!(m.update(&t).is_err());
        assert_eq!(m, EmpiricalModel::new(dims()));
    }

    #[test]
    fn set_cell_round_trip() {
        let mut m = EmpiricalModel::new(dims());
        m.set_cell(0, 1, 1, 2.0, &[1, 0, 2]).unwrap();
        assert_eq!(m.count(0, 1, 1), 3);
        assert_eq!(m.visited_cells().collect::<Vec<_>>(), vec![(0, 1, 1)]);
        assert!(m.set_cell(0, 1, 1, 5.0, &[1, 0, 2]).is_err());
    }

    #[test]
    fn zero_count_is_rejected() {
        let p = BonusParams::new(10, 0.1).unwrap();
        assert_eq!(bonus_l1_sa(0, &p, dims(), 0.1).unwrap_err().category(), "domain");
    }

    #[test]
    fn kl_needs_positive_radius_and_c() {
        let p = BonusParams::new(10, 0.1).unwrap();
        assert!(bonus_kl(1, &p, dims(), 0.1).is_err());
        let p = p.with_kl_min_prob(0.1).unwrap();
        assert!(bonus_kl(1, &p, dims(), 0.0).is_err());
        assert!(bonus_kl(1, &p, dims(), 0.1).unwrap() > 0.0);
        assert!(p.with_kl_min_prob(0.0).is_err());
    }

    #[test]
    fn schedule_matches_formula() {
        let p = BonusParams::new(3000, 0.05).unwrap();
        let d = Dims::new(25, 4, 20).unwrap();
        let sched = BonusSchedule::new(UncertaintyKind::L1Sa, &p, &BonusScale::UNIT, d, 0.1).unwrap();
        for n in [1, 7, 100] {
            let direct = bonus_l1_sa(n, &p, d, 0.1).unwrap();
            assert!((sched.at(n) - direct).abs() < 1e-12 * direct);
        }
        assert_eq!(sched.at(0), sched.at(1));
    }

    #[test]
    fn default_delta() {
        assert_eq!(BonusParams::with_default_delta(5, 20).unwrap().delta, 0.05);
        assert_eq!(BonusParams::with_default_delta(5, 1).unwrap().delta, 0.5);
    }
}
