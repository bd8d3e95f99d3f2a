//! Runs configured learners over seeds and collects per-episode records.

use std::time::Instant;

use rayon::prelude::*;
use ropo_core::env::{build_gridworld, build_hard_mdp, perturb_gridworld, HardMdpConfig};
use ropo_core::learner::{LearnerConfig, LearnerState};
use ropo_core::mdp::sample_episode;
use ropo_core::planner::{robust_value, robust_value_iteration_decoupled, RegretLedger};
use ropo_core::rng::{stream, Purpose};
use ropo_core::{BonusParams, EmpiricalModel, Kernel, RobustMdpSpec, StochasticPolicy, UncertaintyKind};

use crate::config::{
    EnvironmentConfig, EvalKernel, ExperimentConfig, KlConstant, Metric, RunConfig,
};
use crate::error::{HarnessError, Result};

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub seed: u64,
    pub episode: usize,
    pub v_hat: f64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub robust_value: Option<f64>,
    pub instant_regret: Option<f64>,
    pub cumulative_regret: Option<f64>,
}

/// Everything a run needs that does not depend on the seed.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub run: RunConfig,
    pub spec: RobustMdpSpec,
    pub eval_kernel: Kernel,
    pub learner: LearnerConfig,
    /// `V*_1(s_0)` when the planner is enabled.
    pub v_star: Option<f64>,
    pub clipped_rows: Option<usize>,
    /// Source of the KL bonus constant, when one is used.
    pub kl_c: Option<(f64, &'static str)>,
    pub every: usize,
    pub rollouts: usize,
    pub planner_every: usize,
}

impl PreparedRun {
    pub fn new(config: &ExperimentConfig, run: &RunConfig) -> Result<Self> {
        let set = run.uncertainty_set()?;
        let eval = &config.evaluation;
        let horizon = config.environment.horizon();
        let (spec, eval_kernel, clipped_rows) = match &config.environment {
            EnvironmentConfig::Gridworld { .. } => {
                let grid = config.environment.gridworld()?.expect("gridworld config");
                let spec = build_gridworld(&grid, set)?;
                match (eval.kernel, eval.perturbation) {
                    (EvalKernel::Perturbed, Some(p)) => {
                        let out = perturb_gridworld(&grid, &spec, p.radius, p.metric.into())?;
                        (spec, out.kernel, Some(out.clipped_rows))
                    }
                    _ => {
                        let k = spec.nominal().clone();
                        (spec, k, None)
                    }
                }
            }
            EnvironmentConfig::Hard { epsilon, horizon } => {
                let hard = |radius| {
                    build_hard_mdp(&HardMdpConfig {
                        epsilon: *epsilon,
                        radius,
                        horizon: *horizon,
                    })
                };
                let spec = hard(set.radius)?.spec;
                let kernel = match (eval.kernel, eval.perturbation) {
                    (EvalKernel::HardWorstCase, Some(p)) if p.metric == Metric::L1 => hard(p.radius)?.worst_case,
                    _ => spec.nominal().clone(),
                };
                (spec, kernel, None)
            }
        };

        let mut learner = LearnerConfig::new(config.experiment.episodes, horizon)?;
        let mut params = match run.bonus.delta {
            Some(d) => BonusParams::new(config.experiment.episodes, d)?,
            None => learner.bonus,
        };
        let mut kl_c = None;
        if set.kind == UncertaintyKind::Kl && !set.is_nominal() {
            let (c, source) = match run.bonus.kl_c {
                Some(KlConstant::Value(c)) => (c, "config"),
                Some(KlConstant::Named(_)) => (spec.nominal().min_entry(), "oracle"),
                None => {
                    return Err(HarnessError::config(format!(
                        "run {:?}: the KL bonus needs bonus.kl_c (a number or \"oracle\")",
                        run.label
                    )))
                }
            };
            params = params.with_kl_min_prob(c)?;
            kl_c = Some((c, source));
        }
        learner.bonus = params;
        learner.scale = run.bonus.scale.to_scale();
        learner.learning_rate = run.learning_rate;
        learner.mirror_sign = run.mirror_sign.into();

        let v_star = if eval.planner {
            let (table, _) = robust_value_iteration_decoupled(&spec);
            Some(table.v(0, spec.initial_state()))
        } else {
            None
        };
        Ok(PreparedRun {
            run: run.clone(),
            spec,
            eval_kernel,
            learner,
            v_star,
            clipped_rows,
            kl_c,
            every: eval.every,
            rollouts: eval.rollouts,
            planner_every: eval.planner_every,
        })
    }

    fn wants_row(&self, k: usize) -> bool {
        k == 1 || k % self.every == 0 || k == self.learner.episodes
    }

    /// Mean and sample standard deviation of `rollouts` returns of `policy`
    /// under the evaluation kernel, drawn from the `(seed, k, Evaluation)`
    /// stream.
    pub fn evaluate_policy(&self, policy: &StochasticPolicy, seed: u64, k: usize) -> Result<(f64, f64)> {
        let mut rng = stream(seed, k as u64, Purpose::Evaluation);
        let mut returns = Vec::with_capacity(self.rollouts);
        for _ in 0..self.rollouts {
            returns.push(sample_episode(&self.spec, policy, &self.eval_kernel, &mut rng)?.total_reward());
        }
        Ok(mean_std(&returns))
    }

    /// Runs one seed from scratch.
    pub fn run_seed(&self, seed: u64) -> Result<SeedOutput> {
        self.run_seed_from(seed, None, None)
    }

    /// Runs one seed, optionally continuing from a checkpoint and optionally
    /// stopping after episode `stop_after` instead of `K`.
    pub fn run_seed_from(&self, seed: u64, resume: Option<Checkpoint>, stop_after: Option<usize>) -> Result<SeedOutput> {
        let last = stop_after.unwrap_or(self.learner.episodes);
        if last == 0 || last > self.learner.episodes {
            return Err(HarnessError::config(format!(
                "stop episode {last} outside 1..={}",
                self.learner.episodes
            )));
        }
        let started = Instant::now();
        let mut state = LearnerState::new(&self.spec, &self.learner)?;
        let mut ledger = RegretLedger::new();
        let mut first = 1;
        let mut base_regret = 0.0;
        if let Some(c) = resume {
            if c.seed != seed {
                return Err(HarnessError::config(format!(
                    "checkpoint is for seed {}, not {seed}",
                    c.seed
                )));
            }
            if c.episode >= last {
                return Err(HarnessError::config(format!(
                    "checkpoint already covers episode {last}"
                )));
            }
            state = state.restore(c.model, c.policy, c.episode)?;
            first = c.episode + 1;
            base_regret = c.cumulative_regret.unwrap_or(0.0);
        }
        let mut rows = Vec::new();
        let mut current = None;
        for k in first..=last {
            let mut instant = None;
            let mut cumulative = None;
            if let Some(v_star) = self.v_star {
                if current.is_none() || (k - 1) % self.planner_every == 0 {
                    current = Some(robust_value(&self.spec, state.policy())?);
                } else {
                    ledger.held_snapshots = true;
                }
                ledger.push(k, current.expect("set above"), v_star);
                let e = ledger.entries.last().expect("just pushed");
                instant = Some(e.instant_regret);
                cumulative = Some(base_regret + e.cumulative_regret);
            }
            let eval = if self.wants_row(k) {
                Some(self.evaluate_policy(state.policy(), seed, k)?)
            } else {
                None
            };
            let mut rng = stream(seed, k as u64, Purpose::Training);
            let record = state.step(&self.spec, &mut rng)?;
            if let Some((mean, std)) = eval {
                rows.push(Row {
                    seed,
                    episode: k,
                    v_hat: record.v_hat,
                    eval_return_mean: mean,
                    eval_return_std: std,
                    robust_value: current,
                    instant_regret: instant,
                    cumulative_regret: cumulative,
                });
            }
        }
        let cumulative_regret = self.v_star.map(|_| base_regret + ledger.cumulative());
        Ok(SeedOutput {
            seed,
            rows,
            held_snapshots: ledger.held_snapshots,
            checkpoint: Checkpoint {
                seed,
                episode: last,
                cumulative_regret,
                policy: state.policy().clone(),
                model: state.model().clone(),
            },
            learning_rate: state.learning_rate(),
            wall_time: started.elapsed().as_secs_f64(),
        })
    }
}

/// Learner state after some number of completed episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    /// Completed episodes.
    pub episode: usize,
    pub cumulative_regret: Option<f64>,
    pub policy: StochasticPolicy,
    pub model: EmpiricalModel,
}

#[derive(Debug, Clone)]
pub struct SeedOutput {
    pub seed: u64,
    pub rows: Vec<Row>,
    pub held_snapshots: bool,
    pub checkpoint: Checkpoint,
    pub learning_rate: f64,
    pub wall_time: f64,
}

/// Outcome of one run over all seeds; failed seeds keep their error.
#[derive(Debug)]
pub struct RunResult {
    pub prepared: PreparedRun,
    pub seeds: Vec<(u64, Result<SeedOutput>)>,
}

impl RunResult {
    pub fn successes(&self) -> impl Iterator<Item = &SeedOutput> {
        self.seeds.iter().filter_map(|(_, r)| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &HarnessError)> {
        self.seeds.iter().filter_map(|(s, r)| r.as_ref().err().map(|e| (*s, e)))
    }
}

/// Runs every configured run on every seed, in parallel. A failing seed
/// does not stop the others; configuration errors do.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let prepared: Vec<PreparedRun> = config
        .runs
        .iter()
        .map(|r| PreparedRun::new(config, r))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|i| config.experiment.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let outputs: Vec<(usize, u64, Result<SeedOutput>)> = jobs
        .par_iter()
        .map(|&(i, seed)| (i, seed, prepared[i].run_seed(seed)))
        .collect();
    let mut results: Vec<RunResult> = prepared
        .into_iter()
        .map(|p| RunResult {
            prepared: p,
            seeds: Vec::new(),
        })
        .collect();
    for (i, seed, out) in outputs {
        results[i].seeds.push((seed, out));
    }
    Ok(results)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
