//! Goodness-of-fit diagnostics for conditional discrete response models.
//!
//! The central object is the nonrandomized probability integral transform: for
//! an observation `Y_t` with conditional cdf `F_t`, the map
//! `u -> I_t(u)` that is `0` below `F_t(Y_t - 1)`, `1` above `F_t(Y_t)` and
//! linear in between. Under a correctly specified model `I_t(u) - u` is a
//! martingale difference sequence, so empirical processes built from it
//! (`S1`, and the lag-one biparameter `S2`) are centred. Randomized (jittered)
//! variants `R1`, `R2` and their `M`-averaged versions are provided as
//! baselines, together with the marked-residual process `Z` of a single-index
//! fit.
//!
//! Crate layout:
//!
//! * [`model`]: ordered probit/logit and Poisson conditional laws, simulation.
//! * [`transform`]: PIT pairs, the transforms, and exact helper functionals.
//! * [`process`]: evaluable empirical processes with their piecewise structure.
//! * [`stat`]: exact Kolmogorov-Smirnov and Cramer-von Mises functionals.
//! * [`estimate`]: conditional maximum likelihood with analytic derivatives.
//! * [`bootstrap`]: parametric bootstrap p-values and the warp Monte Carlo.
//! * [`harness`]: configuration, CSV ingestion, scenarios and report tables.

// `!(x > 0.0)` style checks are used so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod model;
pub mod process;
pub mod rng;
pub mod stat;
pub mod transform;

pub use error::{Error, Result};
