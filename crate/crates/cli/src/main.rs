//! `rslmc`: convergence studies, diagnostics and sample files from the
//! command line.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rslmc_core::harness::{
    parse_tau_list, persist_samples, run_check, run_convergence_study, write_report, Check, DiagnoseOptions,
    ExperimentSpec, SampleSet, SpecOverrides, PRESET_NAMES,
};
use rslmc_core::reference::reference_for;
use rslmc_core::samplers::run_ensemble;
use rslmc_core::{Error, InitialLaw, Result, SamplerConfig, Scheme, TargetModel};

#[derive(Parser)]
#[command(name = "rslmc", version, about = "Random splitting Langevin Monte Carlo laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step-size sweep against a reference law: CSV table, SVG figure and
    /// JSON report.
    Run(Box<RunArgs>),
    /// Run one diagnostic and write its CSV.
    Diagnose(DiagnoseArgs),
    /// Write reference or sampler samples to a sample file.
    Sample(SampleArgs),
    /// List the figure presets.
    Presets,
}

/// Study flags. Values are kept as text and go through the same parser as
/// config-file entries.
#[derive(Args, Default)]
struct RunArgs {
    /// Flat `key = value` file; keys are these flag names.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    drift_integrator: Option<String>,
    /// Comma-separated step sizes, `2^-k` allowed.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long)]
    particles: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    grid_nodes: Option<String>,
    #[arg(long)]
    bandwidth_scale: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    /// `origin`, `normal` or `point:x1[,x2]`.
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    #[arg(long)]
    shared_coin: bool,
    #[arg(long)]
    reference_method: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// M = 10^7 and T = 50 unless given explicitly.
    #[arg(long)]
    paper_scale: bool,
}

impl RunArgs {
    fn overrides(&self) -> Result<SpecOverrides> {
        let mut o = SpecOverrides::default();
        let pairs = [
            ("preset", &self.preset),
            ("target", &self.target),
            ("scheme", &self.scheme),
            ("drift-integrator", &self.drift_integrator),
            ("tau", &self.tau),
            ("particles", &self.particles),
            ("t-final", &self.t_final),
            ("steps", &self.steps),
            ("beta", &self.beta),
            ("seed", &self.seed),
            ("grid-nodes", &self.grid_nodes),
            ("bandwidth-scale", &self.bandwidth_scale),
            ("replicates", &self.replicates),
            ("init", &self.init),
            ("reference-method", &self.reference_method),
            ("workers", &self.workers),
            ("out-dir", &self.out_dir),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                o.set(key, v)?;
            }
        }
        if self.shared_coin {
            o.shared_coin = Some(true);
        }
        if self.paper_scale {
            o.paper_scale = Some(true);
        }
        Ok(o)
    }

    fn spec(&self) -> Result<ExperimentSpec> {
        let file = match &self.config {
            Some(p) => SpecOverrides::from_config_file(p)?,
            None => SpecOverrides::default(),
        };
        let spec = file.layered(&self.overrides()?).resolve(PRESET_NAMES[0])?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    check: String,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    /// Step sizes, or flow times for `mass` and `jacobian`.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    drift_integrator: Option<String>,
    /// Initial law, or `x;y` starting points for `coupling`.
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    #[arg(long)]
    shared_coin: bool,
    /// Write `<check>.csv` here instead of printing the CSV.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Reference,
    Numerical,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    target: String,
    #[arg(long, value_enum, default_value = "reference")]
    source: Source,
    #[arg(long, default_value_t = 10_000)]
    particles: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    reference_method: Option<String>,
    #[arg(long, default_value = "rslmc")]
    scheme: String,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 20.0)]
    t_final: f64,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    drift_integrator: Option<String>,
    #[arg(long, default_value = "origin", allow_hyphen_values = true)]
    init: String,
    #[arg(long)]
    shared_coin: bool,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = args.spec()?;
    let report = run_convergence_study(&spec)?;
    let dir = spec.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let files = write_report(&report, &dir)?;
    print!("{}", report.to_csv());
    for (label, fit) in [("kl", report.kl_slope), ("w1", report.w1_slope)] {
        if let Some(f) = fit {
            eprintln!(
                "{label} slope {:.4} (residual {:.3e}, {} points)",
                f.slope, f.residual, f.n_points
            );
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let check: Check = args.check.parse()?;
    let opts = DiagnoseOptions {
        target: args.target.clone(),
        scheme: args.scheme.as_deref().map(str::parse).transpose()?,
        tau: args.tau.as_deref().map(parse_tau_list).transpose()?,
        beta: args.beta,
        steps: args.steps,
        particles: args.particles,
        seed: args.seed,
        n_workers: args.workers,
        drift_integrator: args.drift_integrator.as_deref().map(str::parse).transpose()?,
        init: args.init.clone(),
        shared_coin: args.shared_coin,
    };
    let out = run_check(check, &opts)?;
    match &args.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{check}.csv"));
            std::fs::write(&path, &out.csv)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", out.csv),
    }
    for line in &out.summary {
        eprintln!("{line}");
    }
    Ok(())
}

fn sample(args: &SampleArgs) -> Result<()> {
    let target = TargetModel::by_name(&args.target)?;
    let dim = target.dim();
    let samples = match args.source {
        Source::Reference => {
            let method = args.reference_method.as_deref().map(str::parse).transpose()?;
            reference_for(&target, args.beta, args.particles, args.seed, method, args.workers)?.samples
        }
        Source::Numerical => {
            let scheme: Scheme = args.scheme.parse()?;
            let n = args
                .steps
                .unwrap_or_else(|| SamplerConfig::steps_for_horizon(args.t_final, args.tau));
            let mut cfg = SamplerConfig::new(&target, scheme, args.tau, n, args.particles)
                .with_seed(args.seed)
                .with_beta(args.beta)
                .with_workers(args.workers);
            if let Some(i) = &args.drift_integrator {
                cfg = cfg.with_integrator(i.parse()?);
            }
            cfg.shared_coin = args.shared_coin;
            let init = InitialLaw::parse(&args.init, dim)?;
            run_ensemble(&cfg, &target, &init)?.into_positions()
        }
    };
    let set = SampleSet {
        dim,
        seed: args.seed,
        samples,
    };
    match &args.out {
        Some(path) => write_samples(path, &set),
        None => {
            let text = rslmc_core::harness::samples::format_samples(&set);
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_samples(path: &Path, set: &SampleSet) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    persist_samples(path, set)?;
    eprintln!("wrote {} samples to {}", set.count(), path.display());
    Ok(())
}

fn presets() -> Result<()> {
    println!("name,target,scheme,drift_integrator,tau,grid,bandwidth_scale,reference");
    for name in PRESET_NAMES {
        let s = ExperimentSpec::preset(name)?;
        let taus: Vec<String> = s.tau_list.iter().map(|t| t.to_string()).collect();
        let integrator = s.drift_integrator.map(|i| i.to_string()).unwrap_or_default();
        let reference = s.reference_method.map(|m| m.to_string()).unwrap_or_default();
        println!(
            "{name},{},{},{integrator},{},{},{},{reference}",
            s.target,
            s.scheme,
            taus.join(" "),
            s.grid,
            s.bandwidth_scale
        );
    }
    Ok(())
}

fn error_line(e: &Error) -> String {
    let message = e.to_string().replace('"', "'").replace('\n', " ");
    format!("error kind={} message=\"{message}\"", e.kind())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Sample(a) => sample(a),
        Command::Presets => presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(1)
        }
    }
}
