//! Long-run behaviour of the samplers: the Ornstein–Uhlenbeck second-moment
//! oracle, the invariant-measure W1 bias sweep and moment traces.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::ou::ou_mean_variance_recursion;
use crate::density::{empirical_moment, w1_sorted_1d};
use crate::error::{Error, Result};
use crate::harness::{replicate_seed, ConvergenceReport, ReportRow};
use crate::reference::reference_for;
use crate::rng::{Domain, Stream};
use crate::samplers::{
    advance_observed, run_ensemble, with_workers, EnsembleState, InitialLaw, Kernel, SamplerConfig, Scheme, Scratch,
    CHUNK,
};
use crate::stats;
use crate::targets::TargetModel;

/// Empirical against analytic second moment for one scheme and step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuOracleRow {
    pub scheme: Scheme,
    pub tau: f64,
    pub n_steps: u64,
    pub empirical: f64,
    pub stderr: f64,
    pub oracle: f64,
}

impl OuOracleRow {
    /// `(empirical − oracle) / stderr`.
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.oracle) / self.stderr
    }
}

/// Runs `scheme` on the OU target from the origin for `⌈T/τ⌉` steps and
/// compares the ensemble second moment with the exact variance recursion.
pub fn ou_oracle_check(target: &TargetModel, cfg: &SamplerConfig) -> Result<OuOracleRow> {
    let lambda = target.ou_lambda().ok_or_else(|| {
        Error::Config(format!(
            "the variance oracle needs the OU target, not `{}`",
            target.name()
        ))
    })?;
    let state = run_ensemble(cfg, target, &InitialLaw::origin(1))?;
    let squares: Vec<f64> = state.positions().iter().map(|x| x * x).collect();
    let (empirical, stderr) = stats::mean_stderr(&squares);
    let oracle = ou_mean_variance_recursion(0.0, lambda, cfg.beta, cfg.tau, cfg.n_steps, cfg.scheme)?.variance;
    Ok(OuOracleRow {
        scheme: cfg.scheme,
        tau: cfg.tau,
        n_steps: cfg.n_steps,
        empirical,
        stderr,
        oracle,
    })
}

/// Settings shared by every step size of a bias sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasSweepConfig {
    pub particles: usize,
    pub t_final: f64,
    pub beta: f64,
    pub seed: u64,
    pub replicates: usize,
    pub n_workers: usize,
}

impl Default for BiasSweepConfig {
    fn default() -> Self {
        BiasSweepConfig {
            particles: 1_000_000,
            t_final: 20.0,
            beta: 1.0,
            seed: 1,
            replicates: 3,
            n_workers: 1,
        }
    }
}

/// Numerical and exact chains driven by the same Gaussian increments.
///
/// Both start from one exact stationary draw per particle; the exact chain
/// uses the transition `y ↦ e^{−λτ}y + √((1 − e^{−2λτ})/(βλ)) z` and so stays
/// stationary, while the numerical chain relaxes to its own invariant law.
/// Each is an i.i.d. sample of its law; the shared noise only correlates
/// them, which removes most of the sampling noise from their W1 distance.
fn coupled_ou_chains(target: &TargetModel, cfg: &SamplerConfig, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let kernel = Kernel::new(cfg, target)?;
    let a = (-lambda * cfg.tau).exp();
    let exact_scale = ((1.0 - a * a) / (cfg.beta * lambda)).sqrt();
    let stationary_sd = 1.0 / (cfg.beta * lambda).sqrt();
    let m = cfg.n_particles;
    let mut xs = vec![0.0; m];
    let mut ys = vec![0.0; m];
    let failures: Vec<Option<(usize, u64)>> = with_workers(cfg.n_workers, || {
        xs.par_chunks_mut(CHUNK)
            .zip(ys.par_chunks_mut(CHUNK))
            .enumerate()
            .map(|(ci, (xc, yc))| {
                let mut s = Scratch::new(1);
                for (j, (x, y)) in xc.iter_mut().zip(yc.iter_mut()).enumerate() {
                    let p = (ci * CHUNK + j) as u64;
                    let z0: f64 = Stream::new(cfg.seed, p, 0, Domain::Init).sample(StandardNormal);
                    *y = stationary_sd * z0;
                    let mut xv = [*y];
                    for step in 0..cfg.n_steps {
                        let drift_first = kernel.draw_noise(p, step, &mut s);
                        *y = a * *y + exact_scale * s.z[0];
                        kernel.apply(&mut xv, drift_first, &mut s);
                    }
                    *x = xv[0];
                    if !x.is_finite() {
                        return Some((p as usize, cfg.n_steps));
                    }
                }
                None
            })
            .collect()
    });
    if let Some((particle, step)) = failures.into_iter().flatten().min() {
        return Err(Error::Divergence { particle, step });
    }
    Ok((xs, ys))
}

/// W1 between the long-run ensemble of `scheme` and an exact sample of
/// the Gibbs law, for each step size, with a fitted log–log slope.
///
/// On the OU target the exact sample comes from a synchronously coupled
/// exact chain; elsewhere it is an independent reference sample.
pub fn invariant_bias_sweep(
    target: &TargetModel,
    scheme: Scheme,
    taus: &[f64],
    sweep: &BiasSweepConfig,
) -> Result<ConvergenceReport> {
    if target.dim() != 1 {
        return Err(Error::Config("the W1 bias sweep needs a one-dimensional target".into()));
    }
    if sweep.replicates == 0 {
        return Err(Error::param("replicates", "must be positive"));
    }
    let started = std::time::Instant::now();
    let mut report = ConvergenceReport::new(
        &format!("bias-{}-{}", target.name(), scheme),
        target.name(),
        scheme,
        sweep.seed,
        sweep.replicates,
    );
    for &tau in taus {
        let at_tau = |e: Error| Error::AtTau {
            tau,
            source: Box::new(e),
        };
        let mut values = Vec::with_capacity(sweep.replicates);
        for r in 0..sweep.replicates {
            let seed = replicate_seed(sweep.seed, r);
            let cfg = SamplerConfig::new(
                target,
                scheme,
                tau,
                SamplerConfig::steps_for_horizon(sweep.t_final, tau),
                sweep.particles,
            )
            .with_seed(seed)
            .with_beta(sweep.beta)
            .with_workers(sweep.n_workers);
            let w1 = match target.ou_lambda() {
                Some(lambda) => {
                    let (xs, ys) = coupled_ou_chains(target, &cfg, lambda).map_err(at_tau)?;
                    w1_sorted_1d(&xs, &ys)
                }
                None => {
                    let state = run_ensemble(&cfg, target, &InitialLaw::origin(1)).map_err(at_tau)?;
                    let reference = reference_for(target, sweep.beta, sweep.particles, seed, None, sweep.n_workers)
                        .map_err(at_tau)?;
                    w1_sorted_1d(state.positions(), &reference.samples)
                }
            }
            .map_err(at_tau)?;
            values.push(w1);
        }
        let (w1, se) = stats::mean_stderr(&values);
        report.rows.push(ReportRow {
            tau,
            kl: None,
            kl_stderr: None,
            w1: Some(w1),
            w1_stderr: (values.len() > 1).then_some(se),
        });
    }
    report.fit_slopes();
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Empirical `E‖X_n‖^p` after every step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTrace {
    pub order: f64,
    /// Entry `n` is the moment after `n` steps.
    pub values: Vec<f64>,
}

impl MomentTrace {
    /// Largest moment over the whole run divided by the moment after
    /// `step` steps.
    pub fn uniformity_ratio(&self, step: usize) -> Option<f64> {
        let base = *self.values.get(step)?;
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(max / base)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,moment\n");
        for (n, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{n},{v}\n"));
        }
        out
    }
}

/// Runs `cfg` from `init` and records the order-`p` moment after each step.
pub fn moment_trace(target: &TargetModel, cfg: &SamplerConfig, init: &InitialLaw, p: f64) -> Result<MomentTrace> {
    let mut state = EnsembleState::initialize(cfg, target, init)?;
    let d = target.dim();
    let mut values = Vec::with_capacity(cfg.n_steps as usize + 1);
    values.push(empirical_moment(state.positions(), d, p)?);
    let mut failure = None;
    advance_observed(&mut state, cfg, target, cfg.n_steps, |s| {
        match empirical_moment(s.positions(), d, p) {
            Ok(v) => values.push(v),
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(MomentTrace { order: p, values }),
    }
}
