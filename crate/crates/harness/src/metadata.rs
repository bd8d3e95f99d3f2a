//! The `metadata.json` written next to every result set.

use serde_json::{json, Value};

use ropo_core::UncertaintyKind;

use crate::config::{EnvironmentConfig, EvalKernel, ExperimentConfig};
use crate::runner::RunResult;

/// Interpretation choices that affect how results should be read. All are
/// listed in every metadata file; `active` says whether this experiment
/// exercises them.
fn flags(config: &ExperimentConfig, results: &[RunResult]) -> Value {
    let perturbed = config.evaluation.kernel == EvalKernel::Perturbed;
    let any_l1_s = results
        .iter()
        .any(|r| r.prepared.spec.uncertainty().kind == UncertaintyKind::L1S && !r.prepared.spec.uncertainty().is_nominal());
    let held = results.iter().any(|r| r.successes().any(|s| s.held_snapshots));
    let gridworld = matches!(config.environment, EnvironmentConfig::Gridworld { .. });
    let hard = !gridworld;
    json!({
        "perturbation": {
            "active": perturbed,
            "value": "opposite-direction",
        },
        "l1_s_regret": {
            "active": any_l1_s,
            "value": "decoupled per-(s,a) L1 ball of radius min(A*rho, 2)",
        },
        "held_snapshots": {
            "active": held,
            "value": format!("robust values recomputed with period {}", config.evaluation.planner_every),
        },
        "unvisited_rows": {
            "active": true,
            "value": "uniform",
        },
        "bonus_form": {
            "active": true,
            "value": "appendix forms, natural log, per-term multipliers",
        },
        "gridworld_rewards": {
            "active": gridworld,
            "value": "state-based, Bernoulli mean 1 on reward cells",
        },
        "hard_instance_a0": {
            "active": hard,
            "value": "s0 --a0--> s2 with probability 1 - epsilon",
        },
    })
}

pub fn build(config: &ExperimentConfig, results: &[RunResult]) -> Value {
    let runs: Vec<Value> = results
        .iter()
        .map(|r| {
            let p = &r.prepared;
            let set = p.spec.uncertainty();
            let scale = p.learner.scale;
            let first = r.successes().next();
            let failures: Vec<Value> = r
                .failures()
                .map(|(seed, e)| json!({ "seed": seed, "error": e.to_string(), "exit_code": e.exit_code() }))
                .collect();
            let wall: Vec<Value> = r.successes().map(|s| json!({ "seed": s.seed, "seconds": s.wall_time })).collect();
            let regret_reference = match (p.v_star, set.kind) {
                (None, _) => "none",
                (Some(_), UncertaintyKind::L1S) if !set.is_nominal() => "decoupled",
                _ => "exact",
            };
            json!({
                "label": p.run.label,
                "algorithm": p.run.algorithm,
                "uncertainty": { "kind": set.kind.as_str(), "radius": set.radius },
                "learning_rate": first.map(|s| s.learning_rate),
                "delta": p.learner.bonus.delta,
                "bonus_scale": { "reward": scale.reward, "transition": scale.transition, "tail": scale.tail },
                "kl_c": p.kl_c.map(|(c, source)| json!({ "value": c, "source": source })),
                "mirror_sign": p.run.mirror_sign,
                "v_star": p.v_star,
                "regret_reference": regret_reference,
                "held_snapshots": r.successes().any(|s| s.held_snapshots),
                "clipped_rows": p.clipped_rows,
                "seeds_completed": r.successes().count(),
                "failures": failures,
                "wall_time": wall,
            })
        })
        .collect();
    json!({
        "software": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": config.schema_version,
        "config_hash": config.hash(),
        "experiment": config.experiment.name,
        "episodes": config.experiment.episodes,
        "seeds": config.experiment.seeds,
        "evaluation": config.evaluation,
        "flags": flags(config, results),
        "runs": runs,
    })
}
