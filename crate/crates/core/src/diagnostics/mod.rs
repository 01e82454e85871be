//! Oracles and consistency checks that need no density estimation: the
//! Ornstein–Uhlenbeck variance recursion, drift-flow mass transport,
//! reflection coupling and long-run bias and moment behaviour.

pub mod coupling;
pub mod flow;
pub mod ou;
pub mod stationary;

pub use coupling::{eberle_f, reflect, reflection_coupling_run, CouplingParams, CouplingTrace, RateFit};
pub use flow::{jacobian_variational, transport_mass_check, transported_density, MassCheck};
pub use ou::{ou_fixed_point, ou_mean_variance_recursion, ou_variance_map, OuLawState, OuVariance};
pub use stationary::{invariant_bias_sweep, moment_trace, ou_oracle_check, BiasSweepConfig, MomentTrace, OuOracleRow};
