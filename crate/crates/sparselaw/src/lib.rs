//! Sparse pre-training planning and analysis.
//!
//! This crate covers the numeric side of three-phase sparse pre-training
//! (dense training, iterative magnitude pruning, sparse recovery):
//!
//! - [`schedule`]: materializes pruning schedules into parameter/token
//!   trajectories and does average-parameter and compute accounting.
//! - [`lawfit`]: fits loss scaling laws to collections of run records with a
//!   robust Huber objective and multi-start L-BFGS.
//! - [`prescribe`]: solves training-compute-optimal and lifetime-compute-optimal
//!   training prescriptions at a target loss.
//! - [`theorysim`]: simulates loss trajectories under a power-law
//!   loss-vs-compute model and checks its first-order consequences.
//! - [`trainer`]: a small character-level language model with hand-rolled
//!   backprop that executes sparse pre-training schedules for real.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all floating-point
//! transcendentals go through `libm` so results do not depend on the
//! presence of `std`. File formats, configuration files, and the command-line
//! surface live in the companion `sparselaw-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod lawfit;
mod math;
pub mod optim;
pub mod prescribe;
pub mod record;
pub mod schedule;
pub mod theorysim;
pub mod trainer;

pub use record::{RunRecord, RunSource};
pub use schedule::{
    average_params, build_schedule, compression_rate, effective_compute, match_dense,
    solve_iterations, Accounting, ModelShape, ParamTrajectory, Phase, ScheduleError, Segment,
    SparsityScheduleConfig,
};
