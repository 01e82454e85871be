//! Random splitting Langevin Monte Carlo laboratory.
//!
//! The crate is organised along the pipeline of a bias study:
//!
//! - [`targets`]: potentials, gradients and closed-form drift flows.
//! - [`samplers`]: the random splitting stepper, fixed-order and Euler
//!   baselines, and reproducible ensemble propagation.
//! - [`reference`]: exact samples from each target's Gibbs law.
//! - [`density`]: kernel density estimates on grids, grid KL divergence,
//!   sorted-sample Wasserstein-1 and empirical moments.
//! - [`diagnostics`]: the Ornstein–Uhlenbeck variance oracle, flow/Jacobian
//!   mass checks and the reflection-coupling simulator.
//! - [`harness`]: step-size sweeps, slope fits, CSV/SVG output and sample
//!   persistence.

// NaN must fail range checks, so `!(x > 0.0)` is preferred over `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod reference;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod targets;

pub use density::{DensityGrid, KdeParams};
pub use error::{Error, Result};
pub use reference::{ReferenceMethod, ReferenceSampleSet};
pub use samplers::{DriftIntegrator, EnsembleState, InitialLaw, SamplerConfig, Scheme};
pub use targets::{MixtureSpec, ReferenceRecipe, TargetModel};
