use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mdp::{Dims, Kernel, RobustMdpSpec, UncertaintySet};

/// Three states: `s0 = 0` (start), `s1 = 1` and `s2 = 2` (absorbing, reward
/// `+1/(H-1)` and `-1/(H-1)` per step). From `s0`, action 0 reaches `s1`
/// with probability `epsilon` and `s2` otherwise; action 1 splits evenly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardMdpConfig {
    pub epsilon: f64,
    pub radius: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardMdp {
    /// L1 per-(s, a) set of radius `rho`, active only on `(s0, a0)`.
    pub spec: RobustMdpSpec,
    /// Nominal kernel with action 0's split at `s0` moved to
    /// `(epsilon - rho/2, 1 - epsilon + rho/2)`.
    pub worst_case: Kernel,
}

/// Builds the instance. Rewards are signed and some kernel entries are zero,
/// so the spec is a diagnostic one (deterministic rewards).
pub fn build_hard_mdp(config: &HardMdpConfig) -> Result<HardMdp> {
    let HardMdpConfig {
        epsilon,
        radius,
        horizon,
    } = *config;
    if !(epsilon > 0.5 && epsilon <= 1.0) {
        return Err(Error::config(format!("epsilon must lie in (0.5, 1], got {epsilon}")));
    }
    if !(0.0..=1.0).contains(&radius) {
        return Err(Error::config(format!("radius must lie in [0, 1], got {radius}")));
    }
    if horizon < 2 {
        return Err(Error::config("horizon must be at least 2"));
    }
    if epsilon - 0.5 * radius <= 0.0 {
        return Err(Error::config("epsilon - rho/2 must be positive"));
    }
    let dims = Dims::new(3, 2, horizon)?;
    let table = |eps: f64| -> Vec<f64> {
        vec![
            0.0, eps, 1.0 - eps, 0.0, 0.5, 0.5, // s0
            0.0, 1.0, 0.0, 0.0, 1.0, 0.0, // s1
            0.0, 0.0, 1.0, 0.0, 0.0, 1.0, // s2
        ]
    };
    let nominal = Kernel::stationary(dims, &table(epsilon))?;
    let worst_case = Kernel::stationary(dims, &table(epsilon - 0.5 * radius))?;
    let unit = 1.0 / (horizon - 1) as f64;
    let mut rewards = Vec::with_capacity(dims.num_cells());
    let mut mask = Vec::with_capacity(dims.num_cells());
    for _ in 0..horizon {
        rewards.extend_from_slice(&[0.0, 0.0, unit, unit, -unit, -unit]);
        mask.extend_from_slice(&[true, false, false, false, false, false]);
    }
    let spec = RobustMdpSpec::new_diagnostic(nominal, rewards, UncertaintySet::l1_sa(radius)?, 0)?
        .with_uncertainty_mask(mask)?;
    Ok(HardMdp { spec, worst_case })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{policy_value_under_kernel, StochasticPolicy};
    use crate::planner::robust_value;

    fn hard(eps: f64, rho: f64) -> HardMdp {
        build_hard_mdp(&HardMdpConfig {
            epsilon: eps,
            radius: rho,
            horizon: 5,
        })
        .unwrap()
    }

    #[test]
    fn values_under_both_kernels() {
        let m = hard(0.75, 1.0);
        let dims = m.spec.dims();
        let a0 = StochasticPolicy::constant(dims, 0).unwrap();
        let uniform = StochasticPolicy::uniform(dims);
        let nominal = policy_value_under_kernel(&m.spec, &a0, m.spec.nominal()).unwrap();
        assert!((nominal - 0.5).abs() < 1e-12);
        let worst = policy_value_under_kernel(&m.spec, &a0, &m.worst_case).unwrap();
        assert!((worst + 0.5).abs() < 1e-12);
        assert!((robust_value(&m.spec, &a0).unwrap() + 0.5).abs() < 1e-12);
        assert!((robust_value(&m.spec, &uniform).unwrap() + 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_kernels_agree() {
        let m = hard(0.8, 0.0);
        let a0 = StochasticPolicy::constant(m.spec.dims(), 0).unwrap();
        for k in [m.spec.nominal(), &m.worst_case] {
            let v = policy_value_under_kernel(&m.spec, &a0, k).unwrap();
            assert!((v - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn config_errors() {
        let bad = |e, r, h| build_hard_mdp(&HardMdpConfig { epsilon: e, radius: r, horizon: h }).is_err();
        assert!(bad(0.5, 0.1, 5));
        assert!(bad(0.75, 1.5, 5));
        assert!(bad(0.75, 0.5, 1));
    }
}
