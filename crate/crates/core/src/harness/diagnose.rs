//! The `diagnose` checks: each produces one CSV and a few summary lines.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::density::DensityGrid;
use crate::diagnostics::{
    jacobian_variational, moment_trace, ou_oracle_check, reflection_coupling_run, transport_mass_check,
    transported_density, CouplingParams,
};
use crate::error::{Error, Result};
use crate::samplers::{string_enum, DriftIntegrator, InitialLaw, SamplerConfig, Scheme};
use crate::targets::TargetModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    OuOracle,
    Mass,
    Jacobian,
    Coupling,
    Moments,
}

string_enum!(Check, "check", {
    OuOracle => "ou-oracle",
    Mass => "mass",
    Jacobian => "jacobian",
    Coupling => "coupling",
    Moments => "moments",
});

/// Settings for a check. Unset fields take the check's own defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseOptions {
    pub target: Option<String>,
    pub scheme: Option<Scheme>,
    /// Step sizes, or flow times for the mass and Jacobian checks.
    pub tau: Option<Vec<f64>>,
    pub beta: f64,
    pub steps: Option<u64>,
    pub particles: Option<usize>,
    pub seed: u64,
    pub n_workers: usize,
    pub drift_integrator: Option<DriftIntegrator>,
    pub init: Option<String>,
    pub shared_coin: bool,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            target: None,
            scheme: None,
            tau: None,
            beta: 1.0,
            steps: None,
            particles: None,
            seed: 1,
            n_workers: 1,
            drift_integrator: None,
            init: None,
            shared_coin: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutput {
    pub check: Check,
    pub csv: String,
    pub summary: Vec<String>,
}

impl DiagnoseOptions {
    fn target(&self, default: &str) -> Result<TargetModel> {
        TargetModel::by_name(self.target.as_deref().unwrap_or(default))
    }

    fn taus(&self, default: &[f64]) -> Vec<f64> {
        self.tau.clone().unwrap_or_else(|| default.to_vec())
    }

    fn sampler(&self, target: &TargetModel, scheme: Scheme, tau: f64, n_steps: u64, m: usize) -> SamplerConfig {
        let mut cfg = SamplerConfig::new(target, scheme, tau, n_steps, m)
            .with_seed(self.seed)
            .with_beta(self.beta)
            .with_workers(self.n_workers);
        if let Some(i) = self.drift_integrator {
            cfg = cfg.with_integrator(i);
        }
        cfg.shared_coin = self.shared_coin;
        cfg
    }
}

fn std_normal(x: &[f64]) -> f64 {
    x.iter().map(|v| (-0.5 * v * v).exp() / (2.0 * PI).sqrt()).product()
}

pub fn run_check(check: Check, opts: &DiagnoseOptions) -> Result<CheckOutput> {
    match check {
        Check::OuOracle => ou_oracle(opts),
        Check::Mass => mass(opts),
        Check::Jacobian => jacobian(opts),
        Check::Coupling => coupling(opts),
        Check::Moments => moments(opts),
    }
}

fn ou_oracle(opts: &DiagnoseOptions) -> Result<CheckOutput> {
    let target = opts.target("ou")?;
    let schemes = match opts.scheme {
        Some(s) => vec![s],
        None => vec![Scheme::Rslmc, Scheme::LieTrotterDriftFirst, Scheme::LmcEuler],
    };
    let mut csv = String::from("scheme,tau,steps,empirical,stderr,oracle,z\n");
    let mut summary = Vec::new();
    for scheme in schemes {
        for tau in opts.taus(&[0.1, 0.2, 0.5]) {
            let n = opts
                .steps
                .unwrap_or_else(|| SamplerConfig::steps_for_horizon(50.0, tau));
            let cfg = opts.sampler(&target, scheme, tau, n, opts.particles.unwrap_or(1_000_000));
            let row = ou_oracle_check(&target, &cfg).map_err(|e| Error::AtTau {
                tau,
                source: Box::new(e),
            })?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                scheme,
                tau,
                n,
                row.empirical,
                row.stderr,
                row.oracle,
                row.z_score()
            );
            summary.push(format!(
                "{scheme} tau={tau}: second moment {:.6} vs oracle {:.6} (z = {:.2})",
                row.empirical,
                row.oracle,
                row.z_score()
            ));
        }
    }
    Ok(CheckOutput {
        check: Check::OuOracle,
        csv,
        summary,
    })
}

fn mass(opts: &DiagnoseOptions) -> Result<CheckOutput> {
    let target = opts.target("double-well")?;
    if target.dim() != 1 {
        return Err(Error::Config("the mass check runs on one-dimensional targets".into()));
    }
    let grid = DensityGrid::fixed_1d(-8.0, 8.0, 8192)?;
    let mut csv = String::from("target,t,initial_mass,transported_mass,defect,pushforward_error\n");
    let mut summary = Vec::new();
    for t in opts.taus(&[0.25]) {
        let check = transport_mass_check(&target, &std_normal, &grid, t)?;
        let pushforward = match target.ou_lambda() {
            Some(lambda) => {
                let moved = transported_density(&target, &std_normal, &grid, t)?;
                let var = (-2.0 * lambda * t).exp();
                let mut x = [0.0];
                let mut worst = 0.0f64;
                for (i, v) in moved.values().iter().enumerate() {
                    moved.node_into(i, &mut x);
                    let exact = (-0.5 * x[0] * x[0] / var).exp() / (2.0 * PI * var).sqrt();
                    worst = worst.max((v - exact).abs());
                }
                Some(worst)
            }
            None => None,
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            target.name(),
            t,
            check.initial_mass,
            check.transported_mass,
            check.defect,
            pushforward.map(|v| v.to_string()).unwrap_or_default()
        );
        summary.push(format!("{} t={t}: mass defect {:.3e}", target.name(), check.defect));
        if let Some(p) = pushforward {
            summary.push(format!("{} t={t}: max pushforward error {p:.3e}", target.name()));
        }
    }
    Ok(CheckOutput {
        check: Check::Mass,
        csv,
        summary,
    })
}

fn jacobian(opts: &DiagnoseOptions) -> Result<CheckOutput> {
    let target = opts.target("double-well")?;
    if target.dim() != 1 {
        return Err(Error::Config(
            "the Jacobian check runs on one-dimensional targets".into(),
        ));
    }
    let mut csv = String::from("x,t,flow,jacobian,group_defect\n");
    let mut worst = 0.0f64;
    for t in opts.taus(&[0.25]) {
        for i in 0..=40 {
            let x = -2.0 + 0.1 * i as f64;
            let (y, jf) = jacobian_variational(&target, &[x], t)?;
            let (_, jb) = jacobian_variational(&target, &y, -t)?;
            let defect = (jf * jb - 1.0).abs();
            worst = worst.max(defect);
            let _ = writeln!(csv, "{x},{t},{},{jf},{defect}", y[0]);
        }
    }
    let summary = vec![format!(
        "{}: max |J(-t, phi_t(x)) J(t, x) - 1| = {worst:.3e}",
        target.name()
    )];
    Ok(CheckOutput {
        check: Check::Jacobian,
        csv,
        summary,
    })
}

fn coupling(opts: &DiagnoseOptions) -> Result<CheckOutput> {
    let target = opts.target("double-well")?;
    let tau = opts.taus(&[1.0 / 32.0])[0];
    let n = opts.steps.unwrap_or(2000) as usize;
    let (x0, y0) = match &opts.init {
        Some(s) => parse_pair(s, target.dim())?,
        None => {
            let mut x0 = vec![0.0; target.dim()];
            let mut y0 = x0.clone();
            x0[0] = -1.0;
            y0[0] = 1.0;
            (x0, y0)
        }
    };
    let mut params = CouplingParams::new(&target, tau, opts.beta, n, x0, y0)
        .with_seed(opts.seed)
        .with_workers(opts.n_workers);
    if let Some(i) = opts.drift_integrator {
        params.drift_integrator = i;
    }
    let trace = reflection_coupling_run(&target, &params, opts.particles.unwrap_or(100_000))?;
    let mut summary = vec![format!(
        "coupled fraction after {n} steps: {:.4}",
        trace.coupled_fraction[n]
    )];
    match trace.fit {
        Some(fit) => summary.push(format!(
            "contraction rate {:.4} ± {:.4} (steps {}..{}), window monotone: {}",
            fit.rate,
            fit.half_width,
            fit.start,
            fit.end,
            trace.window_monotone()
        )),
        None => summary.push("contraction rate: too few informative steps to fit".into()),
    }
    Ok(CheckOutput {
        check: Check::Coupling,
        csv: trace.to_csv(),
        summary,
    })
}

/// `x1,..;y1,..` starting points for the two chains of a pair.
fn parse_pair(s: &str, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = s
        .split_once(';')
        .ok_or_else(|| Error::param("init", "coupling starts are given as `x1,..;y1,..`"))?;
    let point = |p: &str| -> Result<Vec<f64>> {
        let v = p
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::param("init", e.to_string()))?;
        if v.len() != dim {
            return Err(Error::param("init", "starting point dimension does not match target"));
        }
        Ok(v)
    };
    Ok((point(a)?, point(b)?))
}

fn moments(opts: &DiagnoseOptions) -> Result<CheckOutput> {
    let target = opts.target("double-well")?;
    let tau = opts.taus(&[0.0625])[0];
    let n = opts.steps.unwrap_or(10_000);
    let cfg = opts.sampler(
        &target,
        opts.scheme.unwrap_or(Scheme::Rslmc),
        tau,
        n,
        opts.particles.unwrap_or(100_000),
    );
    let init = match &opts.init {
        Some(s) => InitialLaw::parse(s, target.dim())?,
        None => InitialLaw::origin(target.dim()),
    };
    let trace = moment_trace(&target, &cfg, &init, 4.0)?;
    let base = 1000.min(n as usize);
    let ratio = trace.uniformity_ratio(base).unwrap_or(f64::NAN);
    let summary = vec![format!(
        "running max of the 4th moment / value at step {base}: {ratio:.4}"
    )];
    Ok(CheckOutput {
        check: Check::Moments,
        csv: trace.to_csv(),
        summary,
    })
}
