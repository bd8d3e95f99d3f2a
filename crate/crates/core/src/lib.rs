//! Tabular robust Markov decision processes.
//!
//! This crate holds the algorithmic core: exact finite-horizon dynamics,
//! worst-case support-function solvers for L1 and KL uncertainty sets,
//! empirical model estimation with exploration bonuses, the robust
//! optimistic policy optimization learner, exact robust planning for
//! regret measurement, and the benchmark environments.
//!
//! The crate is `no_std` compatible (it needs `alloc`). Disable the default
//! `std` feature to build without the standard library; transcendental
//! functions then come from `libm`.
//!
//! Indices are dense and 0-based throughout: step `h` in `0..H` corresponds
//! to the 1-based step `h + 1` of the usual episodic notation, and value
//! tables carry one extra terminal layer at index `H` that is identically
//! zero.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod env;
mod error;
pub mod estimation;
pub mod learner;
pub(crate) mod math;
pub mod mdp;
pub mod planner;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use estimation::{BonusParams, BonusScale, EmpiricalModel};
pub use learner::{LearnerConfig, LearnerState, MirrorSign, RunOutput};
pub use mdp::{
    Dims, Kernel, RewardNoise, RobustMdpSpec, StochasticPolicy, Trajectory, UncertaintyKind,
    UncertaintySet, ValueTable,
};
pub use solvers::{DualSolverResult, InnerProblem};
