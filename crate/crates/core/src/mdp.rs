//! Core tabular types and exact finite-horizon dynamics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// Row-sum tolerance for every probability vector in the crate.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Sizes of a tabular episodic problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::config(format!(
                "dimensions must be positive (S={states}, A={actions}, H={horizon})"
            )));
        }
        Ok(Dims {
            states,
            actions,
            horizon,
        })
    }

    #[inline]
    pub(crate) fn cell(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    #[inline]
    pub(crate) fn num_cells(&self) -> usize {
        self.horizon * self.states * self.actions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UncertaintyKind {
    /// L1 ball per (s, a) pair.
    L1Sa,
    /// L1 budget `A * radius` shared by all actions of a state.
    L1S,
    /// KL ball per (s, a) pair.
    Kl,
}

impl UncertaintyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            UncertaintyKind::L1Sa => "l1_sa",
            UncertaintyKind::L1S => "l1_s",
            UncertaintyKind::Kl => "kl",
        }
    }
}

impl core::str::FromStr for UncertaintyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1_sa" | "l1-sa" | "L1_SA" => Ok(UncertaintyKind::L1Sa),
            "l1_s" | "l1-s" | "L1_S" => Ok(UncertaintyKind::L1S),
            "kl" | "KL" => Ok(UncertaintyKind::Kl),
            other => Err(Error::config(format!("unknown uncertainty kind `{other}`"))),
        }
    }
}

/// Uncertainty set descriptor: a kind plus a radius.
///
/// A radius of zero is the exact non-robust case for every kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySet {
    pub kind: UncertaintyKind,
    pub radius: f64,
}

impl UncertaintySet {
    pub fn new(kind: UncertaintyKind, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::domain(format!("radius must be finite and >= 0, got {radius}")));
        }
        if matches!(kind, UncertaintyKind::L1Sa | UncertaintyKind::L1S) && radius > 2.0 {
            return Err(Error::domain(format!(
                "L1 radius {radius} exceeds the simplex diameter 2"
            )));
        }
        Ok(UncertaintySet { kind, radius })
    }

    pub fn l1_sa(radius: f64) -> Result<Self> {
        Self::new(UncertaintyKind::L1Sa, radius)
    }

    pub fn l1_s(radius: f64) -> Result<Self> {
        Self::new(UncertaintyKind::L1S, radius)
    }

    pub fn kl(radius: f64) -> Result<Self> {
        Self::new(UncertaintyKind::Kl, radius)
    }

    /// The radius-zero set of the same kind.
    pub fn nominal(kind: UncertaintyKind) -> Self {
        UncertaintySet { kind, radius: 0.0 }
    }

    pub fn is_nominal(&self) -> bool {
        self.radius == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardNoise {
    /// Realized reward equals the mean.
    Deterministic,
    /// Realized reward is Bernoulli with the given mean.
    #[default]
    Bernoulli,
}

/// Per-step transition table `P_h(s' | s, a)`, dense and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    dims: Dims,
    data: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel from `H * S * A` rows of length `S`, validating each row.
    pub fn from_rows(dims: Dims, data: Vec<f64>) -> Result<Self> {
        let expected = dims.num_cells() * dims.states;
        if data.len() != expected {
            return Err(Error::config(format!(
                "kernel has {} entries, expected {expected}",
                data.len()
            )));
        }
        let kernel = Kernel { dims, data };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.num_cells() * dims.states);
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    for next in 0..dims.states {
                        data.push(f(h, s, a, next));
                    }
                }
            }
        }
        Self::from_rows(dims, data)
    }

    /// Repeats one `S * A * S` table across all steps.
    pub fn stationary(dims: Dims, table: &[f64]) -> Result<Self> {
        let per_step = dims.states * dims.actions * dims.states;
        if table.len() != per_step {
            return Err(Error::config(format!(
                "stationary table has {} entries, expected {per_step}",
                table.len()
            )));
        }
        let mut data = Vec::with_capacity(per_step * dims.horizon);
        for _ in 0..dims.horizon {
            data.extend_from_slice(table);
        }
        Self::from_rows(dims, data)
    }

    fn validate(&self) -> Result<()> {
        for h in 0..self.dims.horizon {
            for s in 0..self.dims.states {
                for a in 0..self.dims.actions {
                    check_distribution(self.row(h, s, a))
                        .map_err(|e| e.at_cell(h, s, a))?;
                }
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.dims.states;
        let start = self.dims.cell(h, s, a) * n;
        &self.data[start..start + n]
    }

    /// The `A * S` block of rows for state `s` at step `h`.
    #[inline]
    pub fn block(&self, h: usize, s: usize) -> &[f64] {
        let n = self.dims.states;
        let start = self.dims.cell(h, s, 0) * n;
        &self.data[start..start + n * self.dims.actions]
    }

    /// Replaces one row, checking it is a distribution.
    pub fn set_row(&mut self, h: usize, s: usize, a: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.dims.states {
            return Err(Error::config("row length does not match the state count"));
        }
        check_distribution(row).map_err(|e| e.at_cell(h, s, a))?;
        let n = self.dims.states;
        let start = self.dims.cell(h, s, a) * n;
        self.data[start..start + n].copy_from_slice(row);
        Ok(())
    }

    /// Smallest entry over all rows.
    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &x in row {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::domain(format!("invalid probability {x}")));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::domain(format!("row sums to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Validation {
    Strict,
    // Signed rewards and zero kernel entries allowed (diagnostic instances).
    Relaxed,
}

/// A complete tabular robust MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustMdpSpec {
    dims: Dims,
    nominal: Kernel,
    reward_mean: Vec<f64>,
    reward_noise: RewardNoise,
    uncertainty: UncertaintySet,
    initial_state: usize,
    // Cells where the adversary may act; `None` means every cell.
    robust_cells: Option<Vec<bool>>,
    validation: Validation,
}

impl RobustMdpSpec {
    /// Builds a spec with Bernoulli reward noise.
    ///
    /// Rewards must lie in `[0, 1]`; when the radius is positive every
    /// nominal entry must be strictly positive.
    pub fn new(
        nominal: Kernel,
        reward_mean: Vec<f64>,
        uncertainty: UncertaintySet,
        initial_state: usize,
    ) -> Result<Self> {
        Self::build(nominal, reward_mean, uncertainty, initial_state, Validation::Strict)
    }

    /// Like [`RobustMdpSpec::new`] but accepts signed rewards and zero kernel
    /// entries. Reward noise is deterministic.
    pub fn new_diagnostic(
        nominal: Kernel,
        reward_mean: Vec<f64>,
        uncertainty: UncertaintySet,
        initial_state: usize,
    ) -> Result<Self> {
        Self::build(nominal, reward_mean, uncertainty, initial_state, Validation::Relaxed)
    }

    fn build(
        nominal: Kernel,
        reward_mean: Vec<f64>,
        uncertainty: UncertaintySet,
        initial_state: usize,
        validation: Validation,
    ) -> Result<Self> {
        let dims = nominal.dims();
        let spec = RobustMdpSpec {
            dims,
            nominal,
            reward_mean,
            reward_noise: match validation {
                Validation::Strict => RewardNoise::default(),
                Validation::Relaxed => RewardNoise::Deterministic,
            },
            uncertainty,
            initial_state,
            robust_cells: None,
            validation,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let dims = self.dims;
        if self.reward_mean.len() != dims.num_cells() {
            return Err(Error::config(format!(
                "reward table has {} entries, expected {}",
                self.reward_mean.len(),
                dims.num_cells()
            )));
        }
        if self.initial_state >= dims.states {
            return Err(Error::config("initial state out of range"));
        }
        if let Some(mask) = &self.robust_cells {
            if mask.len() != dims.num_cells() {
                return Err(Error::config("uncertainty mask has the wrong length"));
            }
        }
        for (i, &r) in self.reward_mean.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::config(format!("reward entry {i} is not finite")));
            }
            if self.validation == Validation::Strict && !(0.0..=1.0).contains(&r) {
                return Err(Error::config(format!("reward mean {r} outside [0, 1]")));
            }
        }
        if self.reward_noise == RewardNoise::Bernoulli
            && self.reward_mean.iter().any(|r| !(0.0..=1.0).contains(r))
        {
            return Err(Error::config("Bernoulli rewards need means in [0, 1]"));
        }
        if self.validation == Validation::Strict && !self.uncertainty.is_nominal() {
            for h in 0..dims.horizon {
                for s in 0..dims.states {
                    for a in 0..dims.actions {
                        if self.radius_at(h, s, a) > 0.0
                            && self.nominal.row(h, s, a).iter().any(|&p| p <= 0.0)
                        {
                            return Err(Error::domain(
                                "robust cells need strictly positive nominal rows",
                            )
                            .at_cell(h, s, a));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn with_reward_noise(mut self, noise: RewardNoise) -> Result<Self> {
        self.reward_noise = noise;
        self.validate()?;
        Ok(self)
    }

    /// Restricts the adversary to the cells where `mask[(h*S + s)*A + a]` is true.
    pub fn with_uncertainty_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.robust_cells = Some(mask);
        self.validate()?;
        Ok(self)
    }

    /// Same MDP under a different uncertainty set.
    pub fn with_uncertainty(mut self, uncertainty: UncertaintySet) -> Result<Self> {
        self.uncertainty = uncertainty;
        self.validate()?;
        Ok(self)
    }

    /// Multiplies every reward mean by `factor`. The result skips the
    /// `[0, 1]` range check and uses deterministic rewards.
    pub fn with_scaled_rewards(mut self, factor: f64) -> Self {
        for r in &mut self.reward_mean {
            *r *= factor;
        }
        self.validation = Validation::Relaxed;
        self.reward_noise = RewardNoise::Deterministic;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn nominal(&self) -> &Kernel {
        &self.nominal
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.reward_mean[self.dims.cell(h, s, a)]
    }

    pub fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    pub fn uncertainty(&self) -> UncertaintySet {
        self.uncertainty
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn uncertainty_mask(&self) -> Option<&[bool]> {
        self.robust_cells.as_deref()
    }

    /// Effective radius at one cell: zero where the mask disables the adversary.
    #[inline]
    pub fn radius_at(&self, h: usize, s: usize, a: usize) -> f64 {
        match &self.robust_cells {
            Some(mask) if !mask[self.dims.cell(h, s, a)] => 0.0,
            _ => self.uncertainty.radius,
        }
    }

    /// Whether every robust cell's nominal row is strictly positive.
    pub fn has_positive_kernel(&self) -> bool {
        self.nominal.min_entry() > 0.0
    }
}

/// Time-indexed action distributions `pi_h(. | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    dims: Dims,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn uniform(dims: Dims) -> Self {
        let p = 1.0 / dims.actions as f64;
        StochasticPolicy {
            dims,
            probs: vec![p; dims.num_cells()],
        }
    }

    /// Point-mass policy from one action per `(h, s)`.
    pub fn deterministic(dims: Dims, actions: &[usize]) -> Result<Self> {
        if actions.len() != dims.horizon * dims.states {
            return Err(Error::config("need one action per (step, state)"));
        }
        let mut probs = vec![0.0; dims.num_cells()];
        for (i, &a) in actions.iter().enumerate() {
            if a >= dims.actions {
                return Err(Error::config(format!("action {a} out of range")));
            }
            probs[i * dims.actions + a] = 1.0;
        }
        Ok(StochasticPolicy { dims, probs })
    }

    /// The same action at every step and state.
    pub fn constant(dims: Dims, action: usize) -> Result<Self> {
        Self::deterministic(dims, &vec![action; dims.horizon * dims.states])
    }

    pub fn from_probs(dims: Dims, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != dims.num_cells() {
            return Err(Error::config("policy table has the wrong length"));
        }
        for (i, row) in probs.chunks(dims.actions).enumerate() {
            check_distribution(row)
                .map_err(|e| e.at_cell(i / dims.states, i % dims.states, 0))?;
        }
        Ok(StochasticPolicy { dims, probs })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.dims.cell(h, s, 0);
        &self.probs[start..start + self.dims.actions]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        let start = self.dims.cell(h, s, 0);
        &mut self.probs[start..start + self.dims.actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Value and Q tables over steps `0..=H`; the final layer is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    dims: Dims,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(dims: Dims) -> Self {
        ValueTable {
            dims,
            v: vec![0.0; (dims.horizon + 1) * dims.states],
            q: vec![0.0; (dims.horizon + 1) * dims.states * dims.actions],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.dims.states + s]
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.dims.states + s) * self.dims.actions + a]
    }

    /// Values of every state at step `h`.
    #[inline]
    pub fn v_layer(&self, h: usize) -> &[f64] {
        let n = self.dims.states;
        &self.v[h * n..(h + 1) * n]
    }

    #[inline]
    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.dims.states + s) * self.dims.actions;
        &self.q[start..start + self.dims.actions]
    }

    #[inline]
    pub(crate) fn set_v(&mut self, h: usize, s: usize, value: f64) {
        self.v[h * self.dims.states + s] = value;
    }

    #[inline]
    pub(crate) fn set_q(&mut self, h: usize, s: usize, a: usize, value: f64) {
        self.q[(h * self.dims.states + s) * self.dims.actions + a] = value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    /// 0-based step index.
    pub h: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Index drawn from `probs` with a uniform `u` in `[0, 1)`.
#[inline]
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn check_shapes(spec: &RobustMdpSpec, policy: &StochasticPolicy, dynamics: &Kernel) -> Result<()> {
    if policy.dims() != spec.dims() {
        return Err(Error::config(format!(
            "policy shape {:?} does not match spec shape {:?}",
            policy.dims(),
            spec.dims()
        )));
    }
    if dynamics.dims() != spec.dims() {
        return Err(Error::config(format!(
            "dynamics shape {:?} does not match spec shape {:?}",
            dynamics.dims(),
            spec.dims()
        )));
    }
    Ok(())
}

/// Rolls out one episode of `H` steps from the initial state.
pub fn sample_episode<R: Rng + ?Sized>(
    spec: &RobustMdpSpec,
    policy: &StochasticPolicy,
    dynamics: &Kernel,
    rng: &mut R,
) -> Result<Trajectory> {
    check_shapes(spec, policy, dynamics)?;
    let dims = spec.dims();
    let mut steps = Vec::with_capacity(dims.horizon);
    let mut state = spec.initial_state();
    for h in 0..dims.horizon {
        let action = sample_index(policy.row(h, state), rng.gen::<f64>());
        let mean = spec.reward(h, state, action);
        let reward = match spec.reward_noise() {
            RewardNoise::Deterministic => mean,
            RewardNoise::Bernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let next_state = sample_index(dynamics.row(h, state, action), rng.gen::<f64>());
        steps.push(Step {
            h,
            state,
            action,
            reward,
            next_state,
        });
        state = next_state;
    }
    Ok(Trajectory { steps })
}

/// Backward dynamic programming for `pi` under a fixed kernel.
pub fn policy_value_table(
    spec: &RobustMdpSpec,
    policy: &StochasticPolicy,
    dynamics: &Kernel,
) -> Result<ValueTable> {
    check_shapes(spec, policy, dynamics)?;
    let dims = spec.dims();
    let mut table = ValueTable::zeros(dims);
    for h in (0..dims.horizon).rev() {
        for s in 0..dims.states {
            let mut v = 0.0;
            for a in 0..dims.actions {
                let next = table.v_layer(h + 1);
                let cont: f64 = dynamics
                    .row(h, s, a)
                    .iter()
                    .zip(next)
                    .map(|(p, v)| p * v)
                    .sum();
                let q = spec.reward(h, s, a) + cont;
                table.set_q(h, s, a, q);
                v += policy.row(h, s)[a] * q;
            }
            table.set_v(h, s, v);
        }
    }
    Ok(table)
}

/// Exact expected return of `pi` from the initial state under `dynamics`.
pub fn policy_value_under_kernel(
    spec: &RobustMdpSpec,
    policy: &StochasticPolicy,
    dynamics: &Kernel,
) -> Result<f64> {
    Ok(policy_value_table(spec, policy, dynamics)?.v(0, spec.initial_state()))
}
