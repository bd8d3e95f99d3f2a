#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use ropo_core::solvers::{sigma_kl, sigma_l1_s, sigma_l1_sa, InnerProblem};
use ropo_core::UncertaintyKind;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive probability row; some entries are made tiny.
pub fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                rng.gen_range(1e-4..1e-2)
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Values in `[0, top]`, with occasional ties.
pub fn random_values(rng: &mut ChaCha8Rng, n: usize, top: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..top)).collect();
    if n > 1 && rng.gen_bool(0.2) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        v[i] = v[j];
    }
    v
}

pub fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Sigma of the queried row `action` of `block` (`A x S`) for any kind. L1
/// per (s, a) and KL read only the queried row.
pub fn sigma(kind: UncertaintyKind, block: &[f64], action: usize, v: &[f64], rho: f64) -> f64 {
    let n = v.len();
    let row = &block[action * n..(action + 1) * n];
    match kind {
        UncertaintyKind::L1Sa => sigma_l1_sa(&InnerProblem::row(row, v, rho).unwrap()).unwrap().sigma,
        UncertaintyKind::L1S => {
            sigma_l1_s(&InnerProblem::block(block, action, v, rho).unwrap()).unwrap().sigma
        }
        UncertaintyKind::Kl => {
            if rho == 0.0 {
                dot(row, v)
            } else {
                sigma_kl(&InnerProblem::row(row, v, rho).unwrap()).unwrap().sigma
            }
        }
    }
}

/// KL worst case by golden-section search of the concave dual
/// `-lambda rho - lambda ln E_p exp(-V / lambda)` on `[0, top / rho]`.
pub fn kl_golden_section(p: &[f64], v: &[f64], rho: f64) -> f64 {
    let m = v.iter().copied().fold(f64::INFINITY, f64::min);
    let dual = |lambda: f64| -> f64 {
        if lambda <= 0.0 {
            return m;
        }
        let s: f64 = p.iter().zip(v).map(|(p, v)| p * (-(v - m) / lambda).exp()).sum();
        m - lambda * rho - lambda * s.ln()
    };
    let top = v.iter().copied().fold(0.0, f64::max) - m;
    let (mut a, mut b) = (0.0, top.max(1e-12) / rho);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (dual(c), dual(d));
    for _ in 0..300 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = dual(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = dual(d);
        }
    }
    dual(0.5 * (a + b)).max(dual(0.0))
}
