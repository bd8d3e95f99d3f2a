//! Benchmark environments: a slippery gridworld with a kernel perturbation
//! protocol, and a three-state instance on which the non-robust optimal
//! policy is robust-suboptimal.

mod gridworld;
mod hard;

pub use gridworld::{
    build_gridworld, perturb_gridworld, Direction, GridCell, GridworldConfig, Perturbation,
    PerturbationMetric, DEFAULT_LAYOUT,
};
pub use hard::{build_hard_mdp, HardMdp, HardMdpConfig};
