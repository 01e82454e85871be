use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::ReferenceMethod;
use crate::samplers::{DriftIntegrator, Scheme};
use crate::targets::TargetModel;

/// Particle count and horizon used unless `--paper-scale` is given.
pub const DESK_PARTICLES: usize = 200_000;
pub const DESK_T_FINAL: f64 = 20.0;
pub const PAPER_PARTICLES: usize = 10_000_000;
pub const PAPER_T_FINAL: f64 = 50.0;
pub const DEFAULT_REPLICATES: usize = 3;

/// Smallest ensemble for which a KDE comparison is attempted.
pub const MIN_KDE_PARTICLES: usize = 1000;

pub const PRESET_NAMES: [&str; 4] = ["fig1-logcosh", "fig2-doublewell", "fig3-logistic", "fig4-mog2d"];

/// Evaluation grid of a study. Quantile bounds are taken per axis from the
/// reference samples of each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GridSpec {
    Quantile { nodes: usize, lo: f64, hi: f64 },
    Fixed { nodes: usize, lo: f64, hi: f64 },
}

impl GridSpec {
    pub fn nodes(&self) -> usize {
        match *self {
            GridSpec::Quantile { nodes, .. } | GridSpec::Fixed { nodes, .. } => nodes,
        }
    }

    fn with_nodes(self, n: usize) -> Self {
        match self {
            GridSpec::Quantile { lo, hi, .. } => GridSpec::Quantile { nodes: n, lo, hi },
            GridSpec::Fixed { lo, hi, .. } => GridSpec::Fixed { nodes: n, lo, hi },
        }
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            GridSpec::Quantile { nodes, lo, hi } => write!(f, "quantile {nodes} [{lo}, {hi}]"),
            GridSpec::Fixed { nodes, lo, hi } => write!(f, "fixed {nodes} [{lo}, {hi}]"),
        }
    }
}

/// Everything that determines a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub target: String,
    pub scheme: Scheme,
    /// `None` selects the target's default integrator.
    pub drift_integrator: Option<DriftIntegrator>,
    pub tau_list: Vec<f64>,
    pub particles: usize,
    pub t_final: f64,
    /// Fixed step count overriding `⌈T/τ⌉` for every τ.
    pub n_steps: Option<u64>,
    pub beta: f64,
    pub seed: u64,
    pub grid: GridSpec,
    pub bandwidth_scale: f64,
    pub replicates: usize,
    /// Initial law as accepted by [`crate::samplers::InitialLaw::parse`].
    pub init: String,
    pub shared_coin: bool,
    pub reference_method: Option<ReferenceMethod>,
    pub n_workers: usize,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    fn base(name: &str, target: &str, tau_list: Vec<f64>, grid: GridSpec, bandwidth_scale: f64) -> Self {
        ExperimentSpec {
            name: name.into(),
            target: target.into(),
            scheme: Scheme::Rslmc,
            drift_integrator: None,
            tau_list,
            particles: DESK_PARTICLES,
            t_final: DESK_T_FINAL,
            n_steps: None,
            beta: 1.0,
            seed: 1,
            grid,
            bandwidth_scale,
            replicates: DEFAULT_REPLICATES,
            init: "origin".into(),
            shared_coin: false,
            reference_method: None,
            n_workers: 1,
            out_dir: None,
        }
    }

    /// A named figure preset at desk scale.
    pub fn preset(name: &str) -> Result<Self> {
        let quantile = |nodes| GridSpec::Quantile {
            nodes,
            lo: 1e-4,
            hi: 1.0 - 1e-4,
        };
        let spec = match name {
            "fig1-logcosh" => {
                let mut s = Self::base(
                    name,
                    "quad-logcosh",
                    vec![1.0, 0.5, 0.25, 0.125, 0.0625],
                    quantile(512),
                    2.0,
                );
                s.drift_integrator = Some(DriftIntegrator::Heun);
                s.reference_method = Some(ReferenceMethod::Rejection);
                s
            }
            "fig2-doublewell" => {
                let taus = (4..=8).map(|k| 2f64.powi(-k)).collect();
                let grid = GridSpec::Fixed {
                    nodes: 1024,
                    lo: -4.0,
                    hi: 4.0,
                };
                let mut s = Self::base(name, "double-well", taus, grid, 1.0);
                s.drift_integrator = Some(DriftIntegrator::StrangDoubleWell);
                s.reference_method = Some(ReferenceMethod::Rejection);
                s
            }
            "fig3-logistic" => {
                let mut s = Self::base(name, "logistic", vec![1.0, 0.8, 0.6, 0.4, 0.2], quantile(512), 3.0);
                s.drift_integrator = Some(DriftIntegrator::Heun);
                s.reference_method = Some(ReferenceMethod::InverseCdf);
                s
            }
            "fig4-mog2d" => {
                let mut s = Self::base(name, "mog2d", vec![0.8, 0.6, 0.4, 0.2, 0.1], quantile(300), 1.0);
                s.drift_integrator = Some(DriftIntegrator::Heun);
                s.reference_method = Some(ReferenceMethod::MixtureDirect);
                s
            }
            _ => {
                return Err(Error::Unknown {
                    kind: "preset",
                    name: name.into(),
                })
            }
        };
        Ok(spec)
    }

    /// Switches to the full particle count and horizon.
    pub fn paper_scale(mut self) -> Self {
        self.particles = PAPER_PARTICLES;
        self.t_final = PAPER_T_FINAL;
        self
    }

    pub fn target_model(&self) -> Result<TargetModel> {
        TargetModel::by_name(&self.target)
    }

    pub fn validate(&self) -> Result<()> {
        let target = self.target_model()?;
        if self.tau_list.is_empty() {
            return Err(Error::param("tau", "at least one step size is required"));
        }
        if let Some(bad) = self.tau_list.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::param("tau", format!("step sizes must be positive, got {bad}")));
        }
        let pairs = self.tau_list.windows(2);
        let decreasing = pairs.clone().all(|w| w[1] < w[0]);
        let increasing = pairs.clone().all(|w| w[1] > w[0]);
        if !(decreasing || increasing) {
            return Err(Error::param("tau", "step sizes must be distinct and sorted"));
        }
        if self.particles < MIN_KDE_PARTICLES {
            return Err(Error::param(
                "particles",
                format!("KDE comparisons need at least {MIN_KDE_PARTICLES} particles"),
            ));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::param("t_final", "must be positive"));
        }
        if self.n_steps == Some(0) {
            return Err(Error::param("steps", "must be positive"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::param("beta", "must be positive"));
        }
        if !(self.bandwidth_scale > 0.0) || !self.bandwidth_scale.is_finite() {
            return Err(Error::param("bandwidth_scale", "must be positive"));
        }
        if self.replicates == 0 {
            return Err(Error::param("replicates", "must be positive"));
        }
        if self.n_workers == 0 {
            return Err(Error::param("workers", "must be positive"));
        }
        if self.grid.nodes() < 2 {
            return Err(Error::param("grid", "at least two nodes per axis"));
        }
        match self.grid {
            GridSpec::Quantile { lo, hi, .. } if !(0.0 <= lo && lo < hi && hi <= 1.0) => {
                return Err(Error::param("grid", "quantile bounds must satisfy 0 ≤ lo < hi ≤ 1"))
            }
            GridSpec::Fixed { lo, hi, .. } if !(lo < hi) => {
                return Err(Error::param("grid", "range must satisfy lo < hi"))
            }
            _ => {}
        }
        crate::samplers::InitialLaw::parse(&self.init, target.dim())?;
        Ok(())
    }
}

/// Optional settings layered over a preset: config-file values first, then
/// command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpecOverrides {
    pub preset: Option<String>,
    pub target: Option<String>,
    pub scheme: Option<Scheme>,
    pub drift_integrator: Option<DriftIntegrator>,
    pub tau_list: Option<Vec<f64>>,
    pub particles: Option<usize>,
    pub t_final: Option<f64>,
    pub n_steps: Option<u64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub grid_nodes: Option<usize>,
    pub bandwidth_scale: Option<f64>,
    pub replicates: Option<usize>,
    pub init: Option<String>,
    pub shared_coin: Option<bool>,
    pub reference_method: Option<ReferenceMethod>,
    pub n_workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub paper_scale: Option<bool>,
}

macro_rules! layer {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl SpecOverrides {
    /// `self` with every field set in `top` replaced.
    pub fn layered(mut self, top: &SpecOverrides) -> Self {
        layer!(
            self,
            top,
            preset,
            target,
            scheme,
            drift_integrator,
            tau_list,
            particles,
            t_final,
            n_steps,
            beta,
            seed,
            grid_nodes,
            bandwidth_scale,
            replicates,
            init,
            shared_coin,
            reference_method,
            n_workers,
            out_dir,
            paper_scale
        );
        self
    }

    /// Builds the spec from the named (or given default) preset. The
    /// paper-scale switch is applied before explicit particle and horizon
    /// values so those still win.
    pub fn resolve(&self, default_preset: &str) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::preset(self.preset.as_deref().unwrap_or(default_preset))?;
        if self.paper_scale == Some(true) {
            spec = spec.paper_scale();
        }
        if let Some(t) = &self.target {
            spec.target = t.clone();
            if self.drift_integrator.is_none() {
                spec.drift_integrator = None;
            }
            if self.reference_method.is_none() {
                spec.reference_method = None;
            }
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { spec.$f = v.clone(); } )* };
        }
        set!(
            scheme,
            tau_list,
            particles,
            t_final,
            beta,
            seed,
            bandwidth_scale,
            replicates,
            init,
            shared_coin,
            n_workers
        );
        if let Some(v) = self.drift_integrator {
            spec.drift_integrator = Some(v);
        }
        if let Some(v) = self.reference_method {
            spec.reference_method = Some(v);
        }
        if let Some(v) = self.n_steps {
            spec.n_steps = Some(v);
        }
        if let Some(v) = &self.out_dir {
            spec.out_dir = Some(v.clone());
        }
        if let Some(n) = self.grid_nodes {
            spec.grid = spec.grid.with_nodes(n);
        }
        Ok(spec)
    }

    /// Parses flat `key = value` text with `#` comments. Keys are the
    /// command-line flag names without the leading dashes.
    pub fn from_config_text(text: &str, path: &Path) -> Result<Self> {
        let mut out = SpecOverrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |field: &str, detail: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                field: field.to_string(),
                detail,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("line", "expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            out.set(key, value).map_err(|e| err(key, e.to_string()))?;
        }
        Ok(out)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_text(&text, path)
    }

    /// Sets one field from its flag name and textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &'static str, v: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| Error::param(key, format!("`{v}`: {e}")))
        }
        fn flag(v: &str) -> Result<bool> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::param("flag", format!("expected true or false, got `{v}`"))),
            }
        }
        match key {
            "preset" => self.preset = Some(value.into()),
            "target" => self.target = Some(value.into()),
            "scheme" => self.scheme = Some(value.parse()?),
            "drift-integrator" => self.drift_integrator = Some(value.parse()?),
            "tau" => self.tau_list = Some(parse_tau_list(value)?),
            "particles" => self.particles = Some(num("particles", value)?),
            "t-final" => self.t_final = Some(num("t-final", value)?),
            "steps" => self.n_steps = Some(num("steps", value)?),
            "beta" => self.beta = Some(num("beta", value)?),
            "seed" => self.seed = Some(num("seed", value)?),
            "grid-nodes" => self.grid_nodes = Some(num("grid-nodes", value)?),
            "bandwidth-scale" => self.bandwidth_scale = Some(num("bandwidth-scale", value)?),
            "replicates" => self.replicates = Some(num("replicates", value)?),
            "init" => self.init = Some(value.into()),
            "shared-coin" => self.shared_coin = Some(flag(value)?),
            "reference-method" => self.reference_method = Some(value.parse()?),
            "workers" => self.n_workers = Some(num("workers", value)?),
            "out-dir" => self.out_dir = Some(PathBuf::from(value)),
            "paper-scale" => self.paper_scale = Some(flag(value)?),
            _ => {
                return Err(Error::Unknown {
                    kind: "config key",
                    name: key.into(),
                })
            }
        }
        Ok(())
    }
}

/// Comma-separated step sizes; `2^-k` is accepted for powers of two.
pub fn parse_tau_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let v = match t.strip_prefix("2^") {
                Some(exp) => exp.parse::<i32>().map(|k| 2f64.powi(k)).ok(),
                None => t.parse::<f64>().ok(),
            };
            v.ok_or_else(|| Error::param("tau", format!("cannot parse step size `{t}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_snapshot() {
        let fig1 = ExperimentSpec::preset("fig1-logcosh").unwrap();
        assert_eq!(fig1.target, "quad-logcosh");
        assert_eq!(fig1.tau_list, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(
            fig1.grid,
            GridSpec::Quantile {
                nodes: 512,
                lo: 1e-4,
                hi: 0.9999
            }
        );
        assert_eq!(fig1.bandwidth_scale, 2.0);
        assert_eq!(fig1.drift_integrator, Some(DriftIntegrator::Heun));
        assert_eq!(fig1.reference_method, Some(ReferenceMethod::Rejection));

        let fig2 = ExperimentSpec::preset("fig2-doublewell").unwrap();
        assert_eq!(fig2.target, "double-well");
        assert_eq!(fig2.tau_list, vec![0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625]);
        assert_eq!(
            fig2.grid,
            GridSpec::Fixed {
                nodes: 1024,
                lo: -4.0,
                hi: 4.0
            }
        );
        assert_eq!(fig2.bandwidth_scale, 1.0);
        assert_eq!(fig2.drift_integrator, Some(DriftIntegrator::StrangDoubleWell));

        let fig3 = ExperimentSpec::preset("fig3-logistic").unwrap();
        assert_eq!(fig3.target, "logistic");
        assert_eq!(fig3.tau_list, vec![1.0, 0.8, 0.6, 0.4, 0.2]);
        assert_eq!(
            fig3.grid,
            GridSpec::Quantile {
                nodes: 512,
                lo: 1e-4,
                hi: 0.9999
            }
        );
        assert_eq!(fig3.bandwidth_scale, 3.0);
        assert_eq!(fig3.reference_method, Some(ReferenceMethod::InverseCdf));

        let fig4 = ExperimentSpec::preset("fig4-mog2d").unwrap();
        assert_eq!(fig4.target, "mog2d");
        assert_eq!(fig4.tau_list, vec![0.8, 0.6, 0.4, 0.2, 0.1]);
        assert_eq!(fig4.grid.nodes(), 300);
        assert_eq!(fig4.bandwidth_scale, 1.0);
        assert_eq!(fig4.reference_method, Some(ReferenceMethod::MixtureDirect));

        for name in PRESET_NAMES {
            let s = ExperimentSpec::preset(name).unwrap();
            assert_eq!((s.particles, s.t_final, s.beta, s.replicates), (200_000, 20.0, 1.0, 3));
            assert_eq!(s.scheme, Scheme::Rslmc);
            s.validate().unwrap();
            let p = s.paper_scale();
            assert_eq!((p.particles, p.t_final), (10_000_000, 50.0));
        }
        assert!(matches!(ExperimentSpec::preset("fig5"), Err(Error::Unknown { .. })));
        assert_eq!(crate::density::KL_FLOOR, 1e-12);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let ok = ExperimentSpec::preset("fig1-logcosh").unwrap();
        let mut s = ok.clone();
        s.tau_list = vec![0.5, 0.5];
        assert!(s.validate().is_err());
        s.tau_list = vec![0.5, -0.1];
        assert!(s.validate().is_err());
        s = ok.clone();
        s.particles = 10;
        assert!(s.validate().is_err());
        s = ok.clone();
        s.target = "banana".into();
        assert!(matches!(s.validate(), Err(Error::Unknown { .. })));
        s = ok.clone();
        s.tau_list = vec![0.1, 0.2, 0.4];
        s.validate().unwrap();
    }

    #[test]
    fn config_text_parses_with_comments() {
        let text =
            "# study\npreset = fig3-logistic\ntau = 1.0, 0.5 # two values\n\nparticles=5000\nshared-coin = true\n";
        let o = SpecOverrides::from_config_text(text, Path::new("c.cfg")).unwrap();
        assert_eq!(o.preset.as_deref(), Some("fig3-logistic"));
        assert_eq!(o.tau_list, Some(vec![1.0, 0.5]));
        assert_eq!(o.particles, Some(5000));
        assert_eq!(o.shared_coin, Some(true));
    }

    #[test]
    fn config_errors_carry_line_and_field() {
        let err = SpecOverrides::from_config_text("seed = 3\nbeta = hot\n", Path::new("x.cfg")).unwrap_err();
        match err {
            Error::Parse { line, field, .. } => {
                assert_eq!(line, 2);
                assert_eq!(field, "beta");
            }
            other => panic!("{other}"),
        }
        let err = SpecOverrides::from_config_text("just words\n", Path::new("x.cfg")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = SpecOverrides::from_config_text("colour = red\n", Path::new("x.cfg")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn precedence_is_cli_then_config_then_preset() {
        let config = SpecOverrides::from_config_text(
            "preset = fig1-logcosh\nseed = 7\nparticles = 4000\nbandwidth-scale = 5",
            Path::new("c"),
        )
        .unwrap();
        let cli = SpecOverrides {
            seed: Some(9),
            ..Default::default()
        };
        let spec = config.layered(&cli).resolve("fig2-doublewell").unwrap();
        assert_eq!(spec.name, "fig1-logcosh");
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.particles, 4000);
        assert_eq!(spec.bandwidth_scale, 5.0);
        assert_eq!(spec.tau_list.len(), 5);

        let full = SpecOverrides {
            paper_scale: Some(true),
            particles: Some(3000),
            ..Default::default()
        }
        .resolve("fig1-logcosh")
        .unwrap();
        assert_eq!((full.particles, full.t_final), (3000, 50.0));
    }

    #[test]
    fn changing_target_resets_target_specific_defaults() {
        let o = SpecOverrides {
            target: Some("ou".into()),
            ..Default::default()
        };
        let spec = o.resolve("fig2-doublewell").unwrap();
        assert_eq!(spec.drift_integrator, None);
        assert_eq!(spec.reference_method, None);
        spec.validate().unwrap();
    }

    #[test]
    fn tau_lists() {
        assert_eq!(parse_tau_list("2^-4,2^-5").unwrap(), vec![0.0625, 0.03125]);
        assert_eq!(parse_tau_list("0.1").unwrap(), vec![0.1]);
        assert!(parse_tau_list("a").is_err());
    }
}
