//! Robust optimistic policy optimization.
//!
//! Each episode executes the current policy on the nominal kernel, evaluates
//! it optimistically on the empirical model (worst case over the uncertainty
//! set plus a count-based bonus, clipped at `H`), takes one exponential
//! weights step on the optimistic Q table, and finally folds the new
//! trajectory into the model.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimation::{BonusParams, BonusScale, BonusSchedule, EmpiricalModel};
use crate::math::{exp, ln, sqrt};
use crate::mdp::{
    sample_episode, Dims, RobustMdpSpec, StochasticPolicy, Trajectory, UncertaintyKind,
    UncertaintySet, ValueTable,
};
use crate::rng::{stream, Purpose};
use crate::solvers::{
    dot, sigma_kl_unchecked, sigma_l1_s_warm, sigma_l1_sa_sorted, InnerProblem, SortedValues,
    SubgradientConfig,
};

/// `beta = sqrt(2 log A / (H^2 K))`.
pub fn default_learning_rate(actions: usize, horizon: usize, episodes: usize) -> Result<f64> {
    if actions < 2 {
        return Err(Error::domain("the default learning rate needs at least two actions"));
    }
    if horizon == 0 || episodes == 0 {
        return Err(Error::config("H and K must be positive"));
    }
    let h = horizon as f64;
    Ok(sqrt(2.0 * ln(actions as f64) / (h * h * episodes as f64)))
}

/// Direction of the exponential-weights step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MirrorSign {
    /// `pi' ∝ pi exp(+beta Q)`: moves toward high value.
    #[default]
    Ascent,
    /// `pi' ∝ pi exp(-beta Q)`.
    Descent,
}

impl MirrorSign {
    fn factor(self) -> f64 {
        match self {
            MirrorSign::Ascent => 1.0,
            MirrorSign::Descent => -1.0,
        }
    }
}

/// Run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub episodes: usize,
    pub bonus: BonusParams,
    pub scale: BonusScale,
    /// `None` uses [`default_learning_rate`].
    pub learning_rate: Option<f64>,
    pub mirror_sign: MirrorSign,
    /// Keep the executed policy of every `snapshot_every`-th episode.
    pub snapshot_every: usize,
    pub subgradient: SubgradientConfig,
}

impl LearnerConfig {
    /// Defaults: `delta = 1/H`, unit bonus multipliers, snapshots every 10 episodes.
    pub fn new(episodes: usize, horizon: usize) -> Result<Self> {
        Ok(LearnerConfig {
            episodes,
            bonus: BonusParams::with_default_delta(episodes, horizon)?,
            scale: BonusScale::UNIT,
            learning_rate: None,
            mirror_sign: MirrorSign::Ascent,
            snapshot_every: 10,
            subgradient: SubgradientConfig::default(),
        })
    }
}

/// Per-episode output of the learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based episode index `k`.
    pub episode: usize,
    /// Optimistic value `V_hat_1(s_0)` of the executed policy.
    pub v_hat: f64,
    /// Realized return of the training trajectory.
    pub train_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot {
    /// Episode in which this policy was executed.
    pub episode: usize,
    pub policy: StochasticPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<EpisodeRecord>,
    pub snapshots: Vec<PolicySnapshot>,
    /// Policy after the last improvement step.
    pub final_policy: StochasticPolicy,
    pub learning_rate: f64,
}

/// Everything the learner carries between episodes.
#[derive(Debug, Clone)]
pub struct LearnerState {
    dims: Dims,
    initial_state: usize,
    set: UncertaintySet,
    // effective radius per (h, s, a)
    radii: Vec<f64>,
    policy: StochasticPolicy,
    model: EmpiricalModel,
    values: ValueTable,
    episode: usize,
    beta: f64,
    sign: MirrorSign,
    bonus: BonusSchedule,
    subgradient: SubgradientConfig,
    // last dual point per (h, s, a) for the per-state L1 set
    warm: Vec<f64>,
}

impl LearnerState {
    /// Fresh learner for `spec` with the uniform initial policy. The learner
    /// uses the spec's uncertainty set and mask; the nominal kernel itself is
    /// never read.
    pub fn new(spec: &RobustMdpSpec, config: &LearnerConfig) -> Result<Self> {
        let dims = spec.dims();
        let set = spec.uncertainty();
        if config.episodes == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        if config.snapshot_every == 0 {
            return Err(Error::config("snapshot cadence must be at least 1"));
        }
        let beta = match config.learning_rate {
            Some(b) if b.is_finite() && b >= 0.0 => b,
            Some(b) => return Err(Error::config(format!("invalid learning rate {b}"))),
            None => default_learning_rate(dims.actions, dims.horizon, config.episodes)?,
        };
        let bonus = bonus_schedule(&set, &config.bonus, &config.scale, dims)?;
        let warm = if set.kind == UncertaintyKind::L1S && !set.is_nominal() {
            vec![f64::NAN; dims.horizon * dims.states * dims.actions * dims.actions]
        } else {
            Vec::new()
        };
        Ok(LearnerState {
            dims,
            initial_state: spec.initial_state(),
            set,
            radii: cells(dims).map(|(h, s, a)| spec.radius_at(h, s, a)).collect(),
            policy: StochasticPolicy::uniform(dims),
            model: EmpiricalModel::new(dims),
            values: ValueTable::zeros(dims),
            episode: 0,
            beta,
            sign: config.mirror_sign,
            bonus,
            subgradient: config.subgradient,
            warm,
        })
    }

    pub fn policy(&self) -> &StochasticPolicy {
        &self.policy
    }

    pub fn model(&self) -> &EmpiricalModel {
        &self.model
    }

    /// Optimistic tables from the latest evaluation.
    pub fn values(&self) -> &ValueTable {
        &self.values
    }

    /// Number of completed episodes.
    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn learning_rate(&self) -> f64 {
        self.beta
    }

    /// Replaces the model, e.g. from a checkpoint.
    pub fn with_model(mut self, model: EmpiricalModel) -> Result<Self> {
        if model.dims() != self.dims {
            return Err(Error::config("model shape does not match the learner"));
        }
        self.model = model;
        Ok(self)
    }

    /// Restores a checkpoint taken after `completed` episodes. Training
    /// streams are addressed by episode, so a resumed run draws the same
    /// trajectories as an uninterrupted one.
    pub fn restore(self, model: EmpiricalModel, policy: StochasticPolicy, completed: usize) -> Result<Self> {
        if policy.dims() != self.dims {
            return Err(Error::config("policy shape does not match the learner"));
        }
        let mut state = self.with_model(model)?;
        state.policy = policy;
        state.episode = completed;
        Ok(state)
    }

    /// Optimistic robust evaluation of the current policy on the current
    /// model. Returns `V_hat_1(s_0)`.
    pub fn evaluate(&mut self) -> Result<f64> {
        let warm = if self.warm.is_empty() {
            None
        } else {
            Some(self.warm.as_mut_slice())
        };
        evaluate_into(
            &self.model,
            &self.policy,
            self.set.kind,
            &self.radii,
            &self.bonus,
            warm,
            &self.subgradient,
            &mut self.values,
        )?;
        Ok(self.values.v(0, self.initial_state))
    }

    /// One exponential-weights step on the latest optimistic Q table.
    pub fn improve(&mut self) {
        omd_step(&mut self.policy, &self.values, self.sign.factor() * self.beta);
    }

    /// Folds a trajectory into the model and advances the episode counter.
    pub fn observe(&mut self, trajectory: &Trajectory) -> Result<()> {
        self.model.update(trajectory)?;
        self.episode += 1;
        Ok(())
    }

    /// One full episode: execute on the nominal kernel, evaluate, improve,
    /// update the model.
    pub fn step<R: Rng + ?Sized>(&mut self, spec: &RobustMdpSpec, rng: &mut R) -> Result<EpisodeRecord> {
        let k = self.episode + 1;
        let mut run = |state: &mut Self| -> Result<EpisodeRecord> {
            let trajectory = sample_episode(spec, &state.policy, spec.nominal(), rng)?;
            let v_hat = state.evaluate()?;
            state.improve();
            state.observe(&trajectory)?;
            Ok(EpisodeRecord {
                episode: k,
                v_hat,
                train_return: trajectory.total_reward(),
            })
        };
        run(self).map_err(|e| e.at_episode(k))
    }
}

fn cells(dims: Dims) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..dims.horizon).flat_map(move |h| {
        (0..dims.states).flat_map(move |s| (0..dims.actions).map(move |a| (h, s, a)))
    })
}

// A nominal set runs the L1 per-(s, a) bonus at radius zero; the KL bonus is
// undefined there.
fn bonus_schedule(
    set: &UncertaintySet,
    params: &BonusParams,
    scale: &BonusScale,
    dims: Dims,
) -> Result<BonusSchedule> {
    if *scale == BonusScale::ZERO {
        return Ok(BonusSchedule::zero());
    }
    if set.is_nominal() {
        BonusSchedule::new(UncertaintyKind::L1Sa, params, scale, dims, 0.0)
    } else {
        BonusSchedule::new(set.kind, params, scale, dims, set.radius)
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_into(
    model: &EmpiricalModel,
    policy: &StochasticPolicy,
    kind: UncertaintyKind,
    radii: &[f64],
    bonus: &BonusSchedule,
    mut warm: Option<&mut [f64]>,
    subgradient: &SubgradientConfig,
    values: &mut ValueTable,
) -> Result<()> {
    let dims = model.dims();
    if policy.dims() != dims || values.dims() != dims {
        return Err(Error::config("policy, model and value table shapes differ"));
    }
    let (n_s, n_a) = (dims.states, dims.actions);
    let cap = dims.horizon as f64;
    let mut next = vec![0.0; n_s];
    let mut row = vec![0.0; n_s];
    let mut block = vec![0.0; n_a * n_s];
    for h in (0..dims.horizon).rev() {
        next.copy_from_slice(values.v_layer(h + 1));
        let min_next = next.iter().copied().fold(f64::INFINITY, f64::min);
        let sorted = (kind == UncertaintyKind::L1Sa).then(|| SortedValues::new(&next));
        for s in 0..n_s {
            let mut block_ready = false;
            let mut v = 0.0;
            for a in 0..n_a {
                let base = model.reward_hat(h, s, a) + bonus.at(model.count(h, s, a));
                // sigma >= min V, so the clip is already active
                let q = if base + min_next >= cap {
                    cap
                } else {
                    let c = (h * n_s + s) * n_a + a;
                    let radius = radii[c];
                    let sigma = if radius == 0.0 {
                        model.fill_kernel_row(h, s, a, &mut row);
                        dot(&row, &next)
                    } else {
                        match kind {
                            UncertaintyKind::L1Sa => {
                                model.fill_kernel_row(h, s, a, &mut row);
                                let sorted = sorted.as_ref().expect("sorted for L1 per (s, a)");
                                sigma_l1_sa_sorted(&row, &next, sorted, radius).0
                            }
                            UncertaintyKind::Kl => {
                                model.fill_kernel_row(h, s, a, &mut row);
                                sigma_kl_unchecked(&row, &next, radius).0
                            }
                            UncertaintyKind::L1S => {
                                if !block_ready {
                                    for (b, chunk) in block.chunks_mut(n_s).enumerate() {
                                        model.fill_kernel_row(h, s, b, chunk);
                                    }
                                    block_ready = true;
                                }
                                let problem = InnerProblem::empirical_block(&block, a, &next, radius)
                                    .map_err(|e| e.at_cell(h, s, a))?;
                                let cache = warm.as_deref_mut().map(|w| &mut w[c * n_a..(c + 1) * n_a]);
                                let start = cache.as_deref().filter(|w| w[0].is_finite());
                                let result = sigma_l1_s_warm(&problem, start, subgradient)
                                    .map_err(|e| e.at_cell(h, s, a))?;
                                if let Some(cache) = cache {
                                    cache.copy_from_slice(&result.dual_point);
                                }
                                result.sigma
                            }
                        }
                    };
                    (base + sigma).min(cap)
                };
                values.set_q(h, s, a, q);
                v += policy.row(h, s)[a] * q;
            }
            values.set_v(h, s, v);
        }
    }
    Ok(())
}

/// Optimistic robust evaluation of `policy` on `model` without a mask.
///
/// Q values are `min(r_hat + sigma(V_next) + b, H)`; the worst case is taken
/// over the set around the empirical kernel.
pub fn robust_policy_evaluation(
    model: &EmpiricalModel,
    policy: &StochasticPolicy,
    set: &UncertaintySet,
    params: &BonusParams,
    scale: &BonusScale,
) -> Result<ValueTable> {
    let dims = model.dims();
    let bonus = bonus_schedule(set, params, scale, dims)?;
    let radii = vec![set.radius; dims.num_cells()];
    let mut warm = vec![f64::NAN; dims.num_cells() * dims.actions];
    let mut values = ValueTable::zeros(dims);
    evaluate_into(
        model,
        policy,
        set.kind,
        &radii,
        &bonus,
        Some(&mut warm),
        &SubgradientConfig::default(),
        &mut values,
    )?;
    Ok(values)
}

fn omd_step(policy: &mut StochasticPolicy, values: &ValueTable, scaled_beta: f64) {
    let dims = policy.dims();
    if scaled_beta == 0.0 {
        return;
    }
    for h in 0..dims.horizon {
        for s in 0..dims.states {
            let q = values.q_row(h, s);
            let row = policy.row_mut(h, s);
            let shift = row
                .iter()
                .zip(q)
                .filter(|(&p, _)| p > 0.0)
                .map(|(_, &q)| scaled_beta * q)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (p, &q) in row.iter_mut().zip(q) {
                if *p > 0.0 {
                    *p *= exp(scaled_beta * q - shift);
                    total += *p;
                }
            }
            for p in row.iter_mut() {
                *p /= total;
            }
        }
    }
}

/// Exponential-weights update `pi'(a|s) ∝ pi(a|s) exp(±beta Q_h(s, a))`.
pub fn omd_improve(
    policy: &StochasticPolicy,
    values: &ValueTable,
    beta: f64,
    sign: MirrorSign,
) -> Result<StochasticPolicy> {
    if policy.dims() != values.dims() {
        return Err(Error::config("policy and value table shapes differ"));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::domain(format!("learning rate must be finite and >= 0, got {beta}")));
    }
    let mut next = policy.clone();
    omd_step(&mut next, values, sign.factor() * beta);
    Ok(next)
}

/// Runs `K` episodes from the uniform policy. Training draws come from the
/// `(seed, k, Training)` streams.
pub fn run_ropo(spec: &RobustMdpSpec, config: &LearnerConfig, seed: u64) -> Result<RunOutput> {
    let mut state = LearnerState::new(spec, config)?;
    let mut records = Vec::with_capacity(config.episodes);
    let mut snapshots = Vec::new();
    for k in 1..=config.episodes {
        if (k - 1) % config.snapshot_every == 0 || k == config.episodes {
            snapshots.push(PolicySnapshot {
                episode: k,
                policy: state.policy.clone(),
            });
        }
        let mut rng = stream(seed, k as u64, Purpose::Training);
        records.push(state.step(spec, &mut rng)?);
    }
    Ok(RunOutput {
        records,
        snapshots,
        final_policy: state.policy,
        learning_rate: state.beta,
    })
}
