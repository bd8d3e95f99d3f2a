//! Exact robust planning on the true nominal model: robust policy
//! evaluation, robust value iteration and regret accounting.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mdp::{RobustMdpSpec, StochasticPolicy, UncertaintyKind, ValueTable};
use crate::solvers::{dot, greedy_worst_case, sigma_kl_unchecked};

// Exact sigma on a nominal row. The L1 balls use the primal greedy
// solution; the per-state L1 set decouples to the per-(s, a) ball of radius
// min(A rho, 2).
fn exact_sigma(kind: UncertaintyKind, actions: usize, p: &[f64], value: &[f64], radius: f64) -> f64 {
    if radius == 0.0 {
        return dot(p, value);
    }
    match kind {
        UncertaintyKind::L1Sa => dot(&greedy_worst_case(p, value, radius), value),
        UncertaintyKind::L1S => {
            let r = (actions as f64 * radius).min(2.0);
            dot(&greedy_worst_case(p, value, r), value)
        }
        UncertaintyKind::Kl => sigma_kl_unchecked(p, value, radius).0,
    }
}

/// Robust value tables of `policy` on `spec`: no bonus, no clipping.
pub fn robust_evaluate(spec: &RobustMdpSpec, policy: &StochasticPolicy) -> Result<ValueTable> {
    let dims = spec.dims();
    if policy.dims() != dims {
        return Err(Error::config(format!(
            "policy shape {:?} does not match spec shape {:?}",
            policy.dims(),
            dims
        )));
    }
    let kind = spec.uncertainty().kind;
    let mut table = ValueTable::zeros(dims);
    let mut next = vec![0.0; dims.states];
    for h in (0..dims.horizon).rev() {
        next.copy_from_slice(table.v_layer(h + 1));
        for s in 0..dims.states {
            let mut v = 0.0;
            for a in 0..dims.actions {
                let p = spec.nominal().row(h, s, a);
                let sigma = exact_sigma(kind, dims.actions, p, &next, spec.radius_at(h, s, a));
                let q = spec.reward(h, s, a) + sigma;
                table.set_q(h, s, a, q);
                v += policy.row(h, s)[a] * q;
            }
            table.set_v(h, s, v);
        }
    }
    Ok(table)
}

/// `V_1^pi(s_0)` under the worst case.
pub fn robust_value(spec: &RobustMdpSpec, policy: &StochasticPolicy) -> Result<f64> {
    Ok(robust_evaluate(spec, policy)?.v(0, spec.initial_state()))
}

fn value_iteration(spec: &RobustMdpSpec, kind: UncertaintyKind, radius_scale: usize) -> (ValueTable, StochasticPolicy) {
    let dims = spec.dims();
    let mut table = ValueTable::zeros(dims);
    let mut greedy = vec![0usize; dims.horizon * dims.states];
    let mut next = vec![0.0; dims.states];
    for h in (0..dims.horizon).rev() {
        next.copy_from_slice(table.v_layer(h + 1));
        for s in 0..dims.states {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..dims.actions {
                let p = spec.nominal().row(h, s, a);
                let mut radius = radius_scale as f64 * spec.radius_at(h, s, a);
                if kind != UncertaintyKind::Kl {
                    radius = radius.min(2.0);
                }
                let q = spec.reward(h, s, a) + exact_sigma(kind, dims.actions, p, &next, radius);
                table.set_q(h, s, a, q);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            table.set_v(h, s, best);
            greedy[h * dims.states + s] = best_a;
        }
    }
    let policy = StochasticPolicy::deterministic(dims, &greedy).expect("greedy actions in range");
    (table, policy)
}

/// Optimal robust values `V*` and a deterministic optimal policy (ties go
/// to the lowest action index).
///
/// Greedy backward induction is exact for per-(s, a) rectangular sets. The
/// per-state L1 set is rejected; see [`robust_value_iteration_decoupled`].
pub fn robust_value_iteration(spec: &RobustMdpSpec) -> Result<(ValueTable, StochasticPolicy)> {
    let kind = spec.uncertainty().kind;
    if kind == UncertaintyKind::L1S && !spec.uncertainty().is_nominal() {
        return Err(Error::unsupported(
            "robust value iteration is exact only for per-(s, a) sets; \
             use robust_value_iteration_decoupled for the per-state L1 set",
        ));
    }
    Ok(value_iteration(spec, kind, 1))
}

/// Value iteration against the per-(s, a) L1 ball of radius `min(A rho, 2)`,
/// which is what the per-state L1 backup reduces to for a fixed action.
/// For the other set kinds this is plain [`robust_value_iteration`].
pub fn robust_value_iteration_decoupled(spec: &RobustMdpSpec) -> (ValueTable, StochasticPolicy) {
    match spec.uncertainty().kind {
        UncertaintyKind::L1S => value_iteration(spec, UncertaintyKind::L1Sa, spec.dims().actions),
        kind => value_iteration(spec, kind, 1),
    }
}

/// One episode of regret accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretEntry {
    pub episode: usize,
    pub robust_value: f64,
    pub v_star: f64,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub entries: Vec<RegretEntry>,
    /// True when some episodes reuse the last earlier snapshot.
    pub held_snapshots: bool,
}

impl RegretLedger {
    pub fn new() -> Self {
        RegretLedger {
            entries: Vec::new(),
            held_snapshots: false,
        }
    }

    /// Appends an episode with robust value `robust_value`.
    pub fn push(&mut self, episode: usize, robust_value: f64, v_star: f64) {
        let instant = v_star - robust_value;
        let cumulative = self.cumulative() + instant;
        self.entries.push(RegretEntry {
            episode,
            robust_value,
            v_star,
            instant_regret: instant,
            cumulative_regret: cumulative,
        });
    }

    pub fn cumulative(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.cumulative_regret)
    }
}

impl Default for RegretLedger {
    fn default() -> Self {
        Self::new()
    }
}

/// Regret of `snapshots` over episodes `1..=episodes`.
///
/// `snapshots` are `(episode, policy)` pairs in increasing episode order and
/// the first one must be episode 1. Episodes between two snapshots are
/// charged the robust value of the earlier one.
pub fn regret_curve(
    spec: &RobustMdpSpec,
    v_star: f64,
    snapshots: &[(usize, &StochasticPolicy)],
    episodes: usize,
) -> Result<RegretLedger> {
    match snapshots.first() {
        Some(&(1, _)) => {}
        _ => return Err(Error::config("the first snapshot must be episode 1")),
    }
    if snapshots.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::config("snapshot episodes must increase"));
    }
    let mut ledger = RegretLedger::new();
    let mut i = 0;
    let mut current = robust_value(spec, snapshots[0].1)?;
    for k in 1..=episodes {
        if i + 1 < snapshots.len() && snapshots[i + 1].0 == k {
            i += 1;
            current = robust_value(spec, snapshots[i].1)?;
        }
        if snapshots[i].0 != k {
            ledger.held_snapshots = true;
        }
        ledger.push(k, current, v_star);
    }
    Ok(ledger)
}
