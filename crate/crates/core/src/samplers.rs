//! Drift and diffusion substeps, the random splitting stepper and its
//! baselines, and reproducible ensemble propagation.
//!
//! One step of the random splitting scheme flips a fair coin ζ per particle:
//! for ζ ≤ ½ the drift ODE is solved first and the Gaussian kick
//! `√(2τ/β)·Z` applied second, otherwise the order is reversed. The ODE
//! solver `S(·, τ)` is selected by [`DriftIntegrator`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Domain, Stream};
use crate::targets::TargetModel;

/// Particles per work unit. Fixed so that reductions never depend on the
/// worker count.
pub(crate) const CHUNK: usize = 1024;

/// Divergence is checked every this many steps (and at the final step).
pub const NAN_CHECK_INTERVAL: u64 = 64;

macro_rules! string_enum {
    ($ty:ident, $what:literal, { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(Error::Unknown { kind: $what, name: s.to_string() }),
                }
            }
        }
    };
}
pub(crate) use string_enum;

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Random order per step (the random splitting scheme).
    Rslmc,
    /// Euler–Maruyama Langevin Monte Carlo.
    LmcEuler,
    LieTrotterDriftFirst,
    LieTrotterDiffusionFirst,
    /// Half drift, full diffusion, half drift.
    StrangSymmetric,
}

string_enum!(Scheme, "scheme", {
    Rslmc => "rslmc",
    LmcEuler => "lmc-euler",
    LieTrotterDriftFirst => "lie-trotter-drift-first",
    LieTrotterDiffusionFirst => "lie-trotter-diffusion-first",
    StrangSymmetric => "strang-symmetric",
});

/// Solver for the drift substep `ẋ = −∇U(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftIntegrator {
    /// Explicit trapezoidal rule.
    Heun,
    /// Closed-form subflow composition for the quartic double well.
    StrangDoubleWell,
    /// The target's closed-form flow.
    ExactFlow,
}

string_enum!(DriftIntegrator, "drift integrator", {
    Heun => "heun",
    StrangDoubleWell => "strang-double-well",
    ExactFlow => "exact-flow",
});

impl DriftIntegrator {
    /// Exact flow for OU, analytic Strang for the double well, Heun otherwise.
    pub fn default_for(target: &TargetModel) -> Self {
        if target.ou_lambda().is_some() {
            DriftIntegrator::ExactFlow
        } else if target.is_double_well() {
            DriftIntegrator::StrangDoubleWell
        } else {
            DriftIntegrator::Heun
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub tau: f64,
    pub beta: f64,
    pub n_steps: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub drift_integrator: DriftIntegrator,
    pub n_particles: usize,
    pub n_workers: usize,
    /// Draw one order coin per step for the whole ensemble instead of one
    /// per particle.
    #[serde(default)]
    pub shared_coin: bool,
}

impl SamplerConfig {
    /// Defaults for `target`: β = 1, one worker, the target's default
    /// drift integrator, per-particle coins.
    pub fn new(target: &TargetModel, scheme: Scheme, tau: f64, n_steps: u64, n_particles: usize) -> Self {
        SamplerConfig {
            tau,
            beta: 1.0,
            n_steps,
            seed: 0,
            scheme,
            drift_integrator: DriftIntegrator::default_for(target),
            n_particles,
            n_workers: 1,
            shared_coin: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_workers(mut self, n_workers: usize) -> Self {
        self.n_workers = n_workers;
        self
    }

    pub fn with_integrator(mut self, integrator: DriftIntegrator) -> Self {
        self.drift_integrator = integrator;
        self
    }

    /// `⌈T/τ⌉`.
    pub fn steps_for_horizon(t_final: f64, tau: f64) -> u64 {
        let ratio = t_final / tau;
        // absorb representation error such as 20 / 0.1 = 200.00000000000003
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded as u64
        } else {
            ratio.ceil() as u64
        }
    }

    pub fn validate(&self, target: &TargetModel) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::param("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::param("beta", format!("must be positive, got {}", self.beta)));
        }
        if self.n_particles == 0 {
            return Err(Error::param("n_particles", "must be positive"));
        }
        if self.n_workers == 0 {
            return Err(Error::param("n_workers", "must be positive"));
        }
        match self.drift_integrator {
            DriftIntegrator::ExactFlow if !target.has_drift_flow() => Err(Error::Config(format!(
                "exact-flow requires a closed-form drift flow; `{}` has none",
                target.name()
            ))),
            DriftIntegrator::StrangDoubleWell if !target.is_double_well() => Err(Error::Config(format!(
                "strang-double-well only applies to the double well, not `{}`",
                target.name()
            ))),
            _ => Ok(()),
        }
    }
}

/// Initial law of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    /// Every particle starts at the given point.
    PointMass(Vec<f64>),
    /// Independent standard normal coordinates.
    StandardNormal,
    /// Explicit positions, row-major `M × d`.
    Samples(Vec<f64>),
}

impl InitialLaw {
    /// Point mass at the origin.
    pub fn origin(dim: usize) -> Self {
        InitialLaw::PointMass(vec![0.0; dim])
    }

    /// Parses `origin`, `normal` or `point:<x1>[,<x2>…]`.
    pub fn parse(s: &str, dim: usize) -> Result<Self> {
        match s {
            "origin" => Ok(InitialLaw::origin(dim)),
            "normal" => Ok(InitialLaw::StandardNormal),
            _ => {
                let coords = s.strip_prefix("point:").ok_or_else(|| Error::Unknown {
                    kind: "initial law",
                    name: s.to_string(),
                })?;
                let point = coords
                    .split(',')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::param("init", e.to_string()))?;
                if point.len() != dim {
                    return Err(Error::param(
                        "init",
                        format!("point has {} coordinates, target dimension is {dim}", point.len()),
                    ));
                }
                Ok(InitialLaw::PointMass(point))
            }
        }
    }
}

/// Positions of `M` trajectories in dimension `d`, the step counter and the
/// master seed keying every particle's counter-based stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    positions: Vec<f64>,
    dim: usize,
    step_index: u64,
    seed: u64,
}

impl EnsembleState {
    pub fn initialize(cfg: &SamplerConfig, target: &TargetModel, init: &InitialLaw) -> Result<Self> {
        let d = target.dim();
        let m = cfg.n_particles;
        let positions = match init {
            InitialLaw::PointMass(p) => {
                if p.len() != d {
                    return Err(Error::param("init", "point dimension does not match target"));
                }
                p.iter().copied().cycle().take(m * d).collect()
            }
            InitialLaw::StandardNormal => {
                let mut pos = vec![0.0; m * d];
                for (i, row) in pos.chunks_mut(d).enumerate() {
                    let mut rng = Stream::new(cfg.seed, i as u64, 0, Domain::Init);
                    row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                }
                pos
            }
            InitialLaw::Samples(s) => {
                if s.len() != m * d {
                    return Err(Error::param(
                        "init",
                        format!("sample set has {} values, expected {}", s.len(), m * d),
                    ));
                }
                s.clone()
            }
        };
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("init", "initial positions must be finite"));
        }
        Ok(EnsembleState {
            positions,
            dim: d,
            step_index: 0,
            seed: cfg.seed,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_particles(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Simulated time `step_index · τ`.
    pub fn elapsed(&self, tau: f64) -> f64 {
        self.step_index as f64 * tau
    }
}

/// One Heun (explicit trapezoidal) step: `Y = X + h f(X)`,
/// `X' = X + (h/2)(f(X) + f(Y))`.
pub fn heun_step<F>(x: &[f64], h: f64, drift: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let d = x.len();
    let mut f0 = vec![0.0; d];
    let mut f1 = vec![0.0; d];
    drift(x, &mut f0);
    let y: Vec<f64> = x.iter().zip(&f0).map(|(xi, fi)| xi + h * fi).collect();
    drift(&y, &mut f1);
    let out: Vec<f64> = (0..d).map(|i| x[i] + 0.5 * h * (f0[i] + f1[i])).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Unstable)
    }
}

/// Exact flow of `ẋ = −4x³` over time `h`.
#[inline]
pub fn dw_cubic_subflow(x: f64, h: f64) -> f64 {
    x / (1.0 + 8.0 * h * x * x).sqrt()
}

/// Exact flow of `ẋ = 4x` over time `h`.
#[inline]
pub fn dw_linear_subflow(x: f64, h: f64) -> f64 {
    x * (4.0 * h).exp()
}

/// Strang composition `φ⁽¹⁾_{h/2} ∘ φ⁽²⁾_h ∘ φ⁽¹⁾_{h/2}` for the double-well
/// drift `−4x³ + 4x`.
#[inline]
pub fn strang_dw_step(x: f64, h: f64) -> f64 {
    let half = 0.5 * h;
    dw_cubic_subflow(dw_linear_subflow(dw_cubic_subflow(x, half), h), half)
}

/// `x + √(2τ/β) z`.
pub fn diffusion_kick(x: &[f64], tau: f64, beta: f64, z: &[f64]) -> Vec<f64> {
    let s = (2.0 * tau / beta).sqrt();
    x.iter().zip(z).map(|(xi, zi)| xi + s * zi).collect()
}

/// Precomputed per-configuration constants for advancing single particles.
pub(crate) struct Kernel<'a> {
    target: &'a TargetModel,
    scheme: Scheme,
    integrator: DriftIntegrator,
    tau: f64,
    kick: f64,
    seed: u64,
    shared_coin: bool,
    dim: usize,
    // double-well Strang constants for full and half steps
    dw_full: (f64, f64),
    dw_half: (f64, f64),
    // OU flow factors for full and half steps
    ou_full: f64,
    ou_half: f64,
}

/// Scratch space for one particle update.
pub(crate) struct Scratch {
    pub(crate) z: Vec<f64>,
    f0: Vec<f64>,
    f1: Vec<f64>,
    y: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(d: usize) -> Self {
        Scratch {
            z: vec![0.0; d],
            f0: vec![0.0; d],
            f1: vec![0.0; d],
            y: vec![0.0; d],
        }
    }
}

#[inline]
fn strang_consts(h: f64) -> (f64, f64) {
    // φ⁽¹⁾_{h/2}(x) = x / √(1 + 4h x²) and φ⁽²⁾_h(x) = x e^{4h}
    (4.0 * h, (4.0 * h).exp())
}

#[inline]
fn strang_with(x: f64, (a, g): (f64, f64)) -> f64 {
    let u = x / (1.0 + a * x * x).sqrt();
    let v = u * g;
    v / (1.0 + a * v * v).sqrt()
}

impl<'a> Kernel<'a> {
    pub(crate) fn new(cfg: &SamplerConfig, target: &'a TargetModel) -> Result<Self> {
        cfg.validate(target)?;
        let lambda = target.ou_lambda().unwrap_or(0.0);
        Ok(Kernel {
            target,
            scheme: cfg.scheme,
            integrator: cfg.drift_integrator,
            tau: cfg.tau,
            kick: (2.0 * cfg.tau / cfg.beta).sqrt(),
            seed: cfg.seed,
            shared_coin: cfg.shared_coin,
            dim: target.dim(),
            dw_full: strang_consts(cfg.tau),
            dw_half: strang_consts(0.5 * cfg.tau),
            ou_full: (-lambda * cfg.tau).exp(),
            ou_half: (-lambda * 0.5 * cfg.tau).exp(),
        })
    }

    pub(crate) fn kick_scale(&self) -> f64 {
        self.kick
    }

    /// `S(x, h)` for `h ∈ {τ, τ/2}`; `half` selects the latter.
    #[inline]
    pub(crate) fn drift(&self, x: &mut [f64], half: bool, s: &mut Scratch) {
        let h = if half { 0.5 * self.tau } else { self.tau };
        match self.integrator {
            DriftIntegrator::ExactFlow if self.target.ou_lambda().is_some() => {
                x[0] *= if half { self.ou_half } else { self.ou_full };
            }
            DriftIntegrator::StrangDoubleWell => {
                x[0] = strang_with(x[0], if half { self.dw_half } else { self.dw_full });
            }
            DriftIntegrator::ExactFlow => {
                self.target.drift_flow(x, h);
            }
            DriftIntegrator::Heun => {
                if self.dim == 1 {
                    let x0 = x[0];
                    let f0 = -self.target.gradient_1d(x0);
                    let f1 = -self.target.gradient_1d(x0 + h * f0);
                    x[0] = x0 + 0.5 * h * (f0 + f1);
                } else {
                    self.target.drift(x, &mut s.f0);
                    for i in 0..self.dim {
                        s.y[i] = x[i] + h * s.f0[i];
                    }
                    self.target.drift(&s.y, &mut s.f1);
                    for i in 0..self.dim {
                        x[i] += 0.5 * h * (s.f0[i] + s.f1[i]);
                    }
                }
            }
        }
    }

    #[inline]
    pub(crate) fn kick(&self, x: &mut [f64], z: &[f64]) {
        for (xi, zi) in x.iter_mut().zip(z) {
            *xi += self.kick * zi;
        }
    }

    /// Draws the step's randomness into `s.z` and returns whether the
    /// random splitting order is drift-first. Non-random schemes ignore the
    /// returned flag.
    #[inline]
    pub(crate) fn draw_noise(&self, particle: u64, step: u64, s: &mut Scratch) -> bool {
        let mut rng = Stream::new(self.seed, particle, step, Domain::Ensemble);
        let drift_first = if self.scheme == Scheme::Rslmc {
            let coin: f64 = if self.shared_coin {
                shared_coin(self.seed, step)
            } else {
                rng.random()
            };
            coin <= 0.5
        } else {
            true
        };
        for zi in s.z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        drift_first
    }

    /// Applies one step with noise already drawn into `s.z`.
    #[inline]
    pub(crate) fn apply(&self, x: &mut [f64], drift_first: bool, s: &mut Scratch) {
        let z = std::mem::take(&mut s.z);
        match self.scheme {
            Scheme::Rslmc => {
                if drift_first {
                    self.drift(x, false, s);
                    self.kick(x, &z);
                } else {
                    self.kick(x, &z);
                    self.drift(x, false, s);
                }
            }
            Scheme::LieTrotterDriftFirst => {
                self.drift(x, false, s);
                self.kick(x, &z);
            }
            Scheme::LieTrotterDiffusionFirst => {
                self.kick(x, &z);
                self.drift(x, false, s);
            }
            Scheme::StrangSymmetric => {
                self.drift(x, true, s);
                self.kick(x, &z);
                self.drift(x, true, s);
            }
            Scheme::LmcEuler => {
                if self.dim == 1 {
                    x[0] += -self.tau * self.target.gradient_1d(x[0]) + self.kick * z[0];
                } else {
                    self.target.gradient(x, &mut s.f0);
                    for i in 0..self.dim {
                        x[i] += -self.tau * s.f0[i] + self.kick * z[i];
                    }
                }
            }
        }
        s.z = z;
    }

    #[inline]
    pub(crate) fn step(&self, x: &mut [f64], particle: u64, step: u64, s: &mut Scratch) {
        let drift_first = self.draw_noise(particle, step, s);
        self.apply(x, drift_first, s);
    }
}

/// The ensemble-wide order coin for `step` (used with `shared_coin`).
pub fn shared_coin(seed: u64, step: u64) -> f64 {
    Stream::new(seed, u64::MAX, step, Domain::SharedCoin).random()
}

/// Runs `f` on a pool of `n_workers` threads.
pub(crate) fn with_workers<R, F>(n_workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match rayon::ThreadPoolBuilder::new().num_threads(n_workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn first_divergence(results: Vec<Option<(usize, u64)>>) -> Result<()> {
    match results.into_iter().flatten().min() {
        Some((particle, step)) => Err(Error::Divergence { particle, step }),
        None => Ok(()),
    }
}

#[inline]
fn row_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Advances every particle `n_steps` steps, particle by particle. Produces
/// exactly the positions of repeated [`step_ensemble`] calls.
pub fn advance(state: &mut EnsembleState, cfg: &SamplerConfig, target: &TargetModel, n_steps: u64) -> Result<()> {
    let kernel = Kernel::new(cfg, target)?;
    if state.seed != cfg.seed || state.dim != target.dim() {
        return Err(Error::Config(
            "ensemble state does not match sampler configuration".into(),
        ));
    }
    let d = state.dim;
    let start = state.step_index;
    let end = start + n_steps;
    let results: Vec<Option<(usize, u64)>> = with_workers(cfg.n_workers, || {
        state
            .positions
            .par_chunks_mut(CHUNK * d)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut s = Scratch::new(d);
                for (j, x) in chunk.chunks_mut(d).enumerate() {
                    let particle = ci * CHUNK + j;
                    for step in start..end {
                        kernel.step(x, particle as u64, step, &mut s);
                        let done = step + 1;
                        if (done % NAN_CHECK_INTERVAL == 0 || done == end) && !row_finite(x) {
                            return Some((particle, done));
                        }
                    }
                }
                None
            })
            .collect()
    });
    first_divergence(results)?;
    state.step_index = end;
    Ok(())
}

/// Advances all particles by one step under `cfg.scheme`.
pub fn step_ensemble(state: &mut EnsembleState, cfg: &SamplerConfig, target: &TargetModel) -> Result<()> {
    let kernel = Kernel::new(cfg, target)?;
    with_workers(cfg.n_workers, || step_with(&kernel, state))
}

/// One step on the current thread pool.
fn step_with(kernel: &Kernel<'_>, state: &mut EnsembleState) -> Result<()> {
    let d = state.dim;
    let step = state.step_index;
    let check = (step + 1).is_multiple_of(NAN_CHECK_INTERVAL);
    let results: Vec<Option<(usize, u64)>> = state
        .positions
        .par_chunks_mut(CHUNK * d)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut s = Scratch::new(d);
            let mut bad = None;
            for (j, x) in chunk.chunks_mut(d).enumerate() {
                let particle = ci * CHUNK + j;
                kernel.step(x, particle as u64, step, &mut s);
                if check && bad.is_none() && !row_finite(x) {
                    bad = Some((particle, step + 1));
                }
            }
            bad
        })
        .collect();
    first_divergence(results)?;
    state.step_index += 1;
    Ok(())
}

/// Advances step by step, calling `observer` after every step.
pub fn advance_observed<F>(
    state: &mut EnsembleState,
    cfg: &SamplerConfig,
    target: &TargetModel,
    n_steps: u64,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(&EnsembleState) + Send,
{
    let kernel = Kernel::new(cfg, target)?;
    with_workers(cfg.n_workers, || {
        for k in 0..n_steps {
            step_with(&kernel, state)?;
            if k + 1 == n_steps && !state.positions.iter().all(|v| v.is_finite()) {
                let d = state.dim;
                let particle = state.positions.chunks(d).position(|x| !row_finite(x)).unwrap_or(0);
                return Err(Error::Divergence {
                    particle,
                    step: state.step_index,
                });
            }
            observer(state);
        }
        Ok(())
    })
}

fn require_scheme(cfg: &SamplerConfig, allowed: &[Scheme]) -> Result<()> {
    if allowed.contains(&cfg.scheme) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "scheme `{}` cannot be advanced by this stepper",
            cfg.scheme
        )))
    }
}

/// One random splitting step for every particle.
pub fn rslmc_step(state: &mut EnsembleState, cfg: &SamplerConfig, target: &TargetModel) -> Result<()> {
    require_scheme(cfg, &[Scheme::Rslmc])?;
    step_ensemble(state, cfg, target)
}

/// One Euler–Maruyama step `X − τ∇U(X) + √(2τ/β) Z` for every particle.
pub fn lmc_euler_step(state: &mut EnsembleState, cfg: &SamplerConfig, target: &TargetModel) -> Result<()> {
    require_scheme(cfg, &[Scheme::LmcEuler])?;
    step_ensemble(state, cfg, target)
}

/// One fixed-order Lie–Trotter step for every particle.
pub fn fixed_order_step(state: &mut EnsembleState, cfg: &SamplerConfig, target: &TargetModel) -> Result<()> {
    require_scheme(cfg, &[Scheme::LieTrotterDriftFirst, Scheme::LieTrotterDiffusionFirst])?;
    step_ensemble(state, cfg, target)
}

/// One symmetric half-drift, kick, half-drift step for every particle.
pub fn strang_symmetric_step(state: &mut EnsembleState, cfg: &SamplerConfig, target: &TargetModel) -> Result<()> {
    require_scheme(cfg, &[Scheme::StrangSymmetric])?;
    step_ensemble(state, cfg, target)
}

/// Initializes `cfg.n_particles` particles from `init` and advances them
/// `cfg.n_steps` steps.
pub fn run_ensemble(cfg: &SamplerConfig, target: &TargetModel, init: &InitialLaw) -> Result<EnsembleState> {
    cfg.validate(target)?;
    let mut state = EnsembleState::initialize(cfg, target, init)?;
    advance(&mut state, cfg, target, cfg.n_steps)?;
    Ok(state)
}
