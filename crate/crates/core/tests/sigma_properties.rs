mod common;

use common::{dot, kl_golden_section, random_row, random_values, rng, sigma};
use proptest::prelude::*;
use rand::Rng;
use ropo_core::solvers::{sigma_l1_s_oracle, sigma_l1_sa_oracle, InnerProblem};
use ropo_core::UncertaintyKind;

const KINDS: [UncertaintyKind; 3] = [UncertaintyKind::L1Sa, UncertaintyKind::L1S, UncertaintyKind::Kl];
const TOL: f64 = 1e-8;

struct Case {
    block: Vec<f64>,
    action: usize,
    v: Vec<f64>,
    rho: f64,
}

fn case(seed: u64, kind: UncertaintyKind) -> Case {
    let mut r = rng(seed);
    let n = r.gen_range(1..=7);
    let actions = if kind == UncertaintyKind::L1S { r.gen_range(1..=4) } else { 1 };
    let block = (0..actions).flat_map(|_| random_row(&mut r, n)).collect();
    let rho = match kind {
        UncertaintyKind::Kl => r.gen_range(0.01..2.0),
        _ => r.gen_range(0.0..2.0),
    };
    Case {
        block,
        action: r.gen_range(0..actions),
        v: random_values(&mut r, n, 10.0),
        rho,
    }
}

impl Case {
    fn sigma(&self, kind: UncertaintyKind, v: &[f64], rho: f64) -> f64 {
        sigma(kind, &self.block, self.action, v, rho)
    }

    fn row(&self) -> &[f64] {
        let n = self.v.len();
        &self.block[self.action * n..(self.action + 1) * n]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn translation_equivariance(seed in any::<u64>(), shift in -5.0f64..5.0) {
        for kind in KINDS {
            let c = case(seed, kind);
            let moved: Vec<f64> = c.v.iter().map(|v| v + shift).collect();
            let lhs = c.sigma(kind, &moved, c.rho);
            let rhs = c.sigma(kind, &c.v, c.rho) + shift;
            prop_assert!((lhs - rhs).abs() <= TOL, "{kind:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn monotone_in_values(seed in any::<u64>(), bump_seed in any::<u64>()) {
        for kind in KINDS {
            let c = case(seed, kind);
            let mut r = rng(bump_seed);
            let higher: Vec<f64> = c.v.iter().map(|v| v + r.gen_range(0.0..2.0)).collect();
            prop_assert!(c.sigma(kind, &c.v, c.rho) <= c.sigma(kind, &higher, c.rho) + TOL);
        }
    }

    #[test]
    fn monotone_in_radius(seed in any::<u64>(), extra in 0.0f64..1.0) {
        for kind in KINDS {
            let c = case(seed, kind);
            let wider = if kind == UncertaintyKind::Kl { c.rho + extra } else { (c.rho + extra).min(2.0) };
            prop_assert!(c.sigma(kind, &c.v, wider) <= c.sigma(kind, &c.v, c.rho) + TOL);
        }
    }

    #[test]
    fn sup_norm_lipschitz(seed in any::<u64>(), noise_seed in any::<u64>()) {
        for kind in KINDS {
            let c = case(seed, kind);
            let mut r = rng(noise_seed);
            let w: Vec<f64> = c.v.iter().map(|v| v + r.gen_range(-1.0..1.0)).collect();
            let dist = c.v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let gap = (c.sigma(kind, &c.v, c.rho) - c.sigma(kind, &w, c.rho)).abs();
            prop_assert!(gap <= dist + TOL);
        }
    }

    #[test]
    fn between_min_and_nominal(seed in any::<u64>()) {
        for kind in KINDS {
            let c = case(seed, kind);
            let s = c.sigma(kind, &c.v, c.rho);
            let min = c.v.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(s >= min - TOL);
            prop_assert!(s <= dot(c.row(), &c.v) + TOL);
        }
    }

    #[test]
    fn duals_match_primal_oracles(seed in any::<u64>()) {
        let c = case(seed, UncertaintyKind::L1Sa);
        let oracle = sigma_l1_sa_oracle(&InnerProblem::row(c.row(), &c.v, c.rho).unwrap()).unwrap();
        prop_assert!((c.sigma(UncertaintyKind::L1Sa, &c.v, c.rho) - oracle).abs() <= 1e-9);

        let c = case(seed, UncertaintyKind::L1S);
        let problem = InnerProblem::block(&c.block, c.action, &c.v, c.rho).unwrap();
        let oracle = sigma_l1_s_oracle(&problem).unwrap();
        prop_assert!((c.sigma(UncertaintyKind::L1S, &c.v, c.rho) - oracle).abs() <= 1e-9);

        let c = case(seed, UncertaintyKind::Kl);
        let oracle = kl_golden_section(c.row(), &c.v, c.rho);
        prop_assert!((c.sigma(UncertaintyKind::Kl, &c.v, c.rho) - oracle).abs() <= 1e-7);
    }

    #[test]
    fn permuting_states_changes_nothing(seed in any::<u64>(), perm_seed in any::<u64>()) {
        for kind in KINDS {
            let c = case(seed, kind);
            let n = c.v.len();
            let actions = c.block.len() / n;
            let mut order: Vec<usize> = (0..n).collect();
            let mut r = rng(perm_seed);
            for i in (1..n).rev() {
                order.swap(i, r.gen_range(0..=i));
            }
            let v: Vec<f64> = order.iter().map(|&i| c.v[i]).collect();
            let block: Vec<f64> = (0..actions)
                .flat_map(|a| order.iter().map(move |&i| (a, i)))
                .map(|(a, i)| c.block[a * n + i])
                .collect();
            let permuted = sigma(kind, &block, c.action, &v, c.rho);
            prop_assert!((permuted - c.sigma(kind, &c.v, c.rho)).abs() <= 1e-7);
        }
    }
}

#[test]
fn kl_reaches_the_minimum_exactly() {
    // rho >= -ln p(argmin): the adversary can put all mass on the minimum
    let p = [0.5, 0.3, 0.2];
    let v = [4.0, 1.5, 3.0];
    for rho in [-(0.3f64).ln(), 1.5, 3.0] {
        assert_eq!(sigma(UncertaintyKind::Kl, &p, 0, &v, rho), 1.5);
    }
}
