use std::path::{Path, PathBuf};
use std::time::Instant;

use super::figure::{emit_figure, FigureStyle};
use super::report::{ConvergenceReport, ReportRow};
use super::spec::{ExperimentSpec, GridSpec};
use crate::density::{
    build_quantile_grid, kde_evaluate, kl_divergence_grid, w1_sorted_1d, Axis, DensityGrid, KdeParams,
};
use crate::error::{Error, Result};
use crate::reference::reference_for;
use crate::rng::derive_seed;
use crate::samplers::{run_ensemble, InitialLaw, SamplerConfig};
use crate::stats;
use crate::targets::TargetModel;

/// Seed of replicate `r`; replicate 0 uses the study seed itself.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        seed
    } else {
        derive_seed(seed, r as u64)
    }
}

/// Sampler settings for one step size of `spec`.
pub fn sampler_config(spec: &ExperimentSpec, target: &TargetModel, tau: f64, seed: u64) -> SamplerConfig {
    let n_steps = spec
        .n_steps
        .unwrap_or_else(|| SamplerConfig::steps_for_horizon(spec.t_final, tau));
    let mut cfg = SamplerConfig::new(target, spec.scheme, tau, n_steps, spec.particles)
        .with_seed(seed)
        .with_beta(spec.beta)
        .with_workers(spec.n_workers);
    if let Some(integrator) = spec.drift_integrator {
        cfg = cfg.with_integrator(integrator);
    }
    cfg.shared_coin = spec.shared_coin;
    cfg
}

fn evaluation_grid(spec: &ExperimentSpec, reference: &[f64], dim: usize) -> Result<DensityGrid> {
    match spec.grid {
        GridSpec::Quantile { nodes, lo, hi } => build_quantile_grid(reference, dim, nodes, lo, hi),
        GridSpec::Fixed { nodes, lo, hi } => {
            let axes = (0..dim)
                .map(|_| Axis::spanning(lo, hi, nodes))
                .collect::<Result<Vec<_>>>()?;
            Ok(DensityGrid::new(axes))
        }
    }
}

fn summarize(values: &[f64]) -> (Option<f64>, Option<f64>) {
    match values.len() {
        0 => (None, None),
        1 => (Some(values[0]), None),
        _ => {
            let (m, se) = stats::mean_stderr(values);
            (Some(m), Some(se))
        }
    }
}

/// Runs every step size of `spec` for every replicate and compares the
/// endpoint ensemble with an exact reference sample by grid KL (and W1 in
/// one dimension).
///
/// Within a replicate the reference sample, its KDE and the evaluation
/// grid are shared by all step sizes.
pub fn run_convergence_study(spec: &ExperimentSpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let started = Instant::now();
    let target = spec.target_model()?;
    let d = target.dim();
    let init = InitialLaw::parse(&spec.init, d)?;
    let n_tau = spec.tau_list.len();
    let mut kl = vec![Vec::with_capacity(spec.replicates); n_tau];
    let mut w1 = vec![Vec::with_capacity(spec.replicates); n_tau];

    for r in 0..spec.replicates {
        let seed = replicate_seed(spec.seed, r);
        let reference = reference_for(
            &target,
            spec.beta,
            spec.particles,
            seed,
            spec.reference_method,
            spec.n_workers,
        )?;
        let grid = evaluation_grid(spec, &reference.samples, d)?;
        let ref_params = KdeParams::silverman(&reference.samples, d, spec.bandwidth_scale)?;
        let ref_density = kde_evaluate(&reference.samples, &ref_params, &grid, spec.n_workers)?;

        for (i, &tau) in spec.tau_list.iter().enumerate() {
            let at_tau = |e: Error| Error::AtTau {
                tau,
                source: Box::new(e),
            };
            let cfg = sampler_config(spec, &target, tau, seed);
            let state = run_ensemble(&cfg, &target, &init).map_err(at_tau)?;
            let samples = state.positions();
            let params = KdeParams::silverman(samples, d, spec.bandwidth_scale).map_err(at_tau)?;
            let density = kde_evaluate(samples, &params, &grid, spec.n_workers).map_err(at_tau)?;
            kl[i].push(kl_divergence_grid(&density, &ref_density).map_err(at_tau)?);
            if d == 1 {
                w1[i].push(w1_sorted_1d(samples, &reference.samples).map_err(at_tau)?);
            }
        }
    }

    let mut report = ConvergenceReport::new(&spec.name, &spec.target, spec.scheme, spec.seed, spec.replicates);
    for (i, &tau) in spec.tau_list.iter().enumerate() {
        let (kl_mean, kl_se) = summarize(&kl[i]);
        let (w1_mean, w1_se) = summarize(&w1[i]);
        report.rows.push(ReportRow {
            tau,
            kl: kl_mean,
            kl_stderr: kl_se,
            w1: w1_mean,
            w1_stderr: w1_se,
        });
    }
    if spec.replicates < 3 {
        report
            .warnings
            .push(format!("{} replicate(s): error bars need at least 3", spec.replicates));
    }
    report.fit_slopes();
    report.spec = Some(spec.clone());
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Writes `<name>.csv`, `<name>.svg` and `<name>.json` into `dir`.
pub fn write_report(report: &ConvergenceReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{}.csv", report.name));
    let svg = dir.join(format!("{}.svg", report.name));
    let json = dir.join(format!("{}.json", report.name));
    std::fs::write(&csv, report.to_csv())?;
    std::fs::write(&svg, emit_figure(report, &FigureStyle::default()))?;
    std::fs::write(&json, report.to_json()?)?;
    Ok(vec![csv, svg, json])
}
