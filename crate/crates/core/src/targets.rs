//! Benchmark potentials.
//!
//! Every target is exposed at unit temperature: the Gibbs law is
//! `ρ*(x) ∝ exp(-β U(x))` and the inverse temperature β is applied by the
//! samplers, never stored here.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::strang_dw_step;

/// How exact reference samples are produced for a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceRecipe {
    InverseCdf,
    Rejection,
    MixtureDirect,
    GaussianExact,
}

impl ReferenceRecipe {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceRecipe::InverseCdf => "inverse-cdf",
            ReferenceRecipe::Rejection => "rejection",
            ReferenceRecipe::MixtureDirect => "mixture-direct",
            ReferenceRecipe::GaussianExact => "gaussian-exact",
        }
    }
}

impl fmt::Display for ReferenceRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReferenceRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "inverse-cdf" => ReferenceRecipe::InverseCdf,
            "rejection" => ReferenceRecipe::Rejection,
            "mixture-direct" => ReferenceRecipe::MixtureDirect,
            "gaussian-exact" => ReferenceRecipe::GaussianExact,
            _ => {
                return Err(Error::Unknown {
                    kind: "reference method",
                    name: s.to_string(),
                })
            }
        })
    }
}

/// Weights, means and covariances of a Gaussian mixture.
///
/// Covariances are stored row-major, `dim * dim` entries each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
}

impl MixtureSpec {
    /// The two-component planar mixture with means (∓2, 0).
    pub fn benchmark_2d() -> Self {
        MixtureSpec {
            weights: vec![0.5, 0.5],
            means: vec![vec![-2.0, 0.0], vec![2.0, 0.0]],
            covariances: vec![vec![0.6, 0.2, 0.2, 0.5], vec![0.5, -0.1, -0.1, 0.7]],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Checks shapes, the probability vector and positive definiteness.
    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(Error::param(
                "mixture",
                "weights, means and covariances must have equal nonzero length",
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::param("weights", format!("must sum to 1 (got {total})")));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::param("means", "dimension must be positive"));
        }
        for (mean, cov) in self.means.iter().zip(&self.covariances) {
            if mean.len() != d || cov.len() != d * d {
                return Err(Error::param("mixture", "inconsistent component dimensions"));
            }
            for i in 0..d {
                for j in 0..i {
                    if (cov[i * d + j] - cov[j * d + i]).abs() > 1e-12 {
                        return Err(Error::NotPositiveDefinite("matrix is not symmetric".into()));
                    }
                }
            }
            cholesky(cov, d)?;
        }
        Ok(())
    }
}

/// Lower Cholesky factor of a symmetric positive-definite `d × d` matrix.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::NotPositiveDefinite(format!("non-positive pivot {s} at row {i}")));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Inverse of an SPD matrix from its Cholesky factor.
fn spd_inverse(l: &[f64], d: usize) -> Vec<f64> {
    // Solve L L^T X = I column by column.
    let mut inv = vec![0.0; d * d];
    let mut y = vec![0.0; d];
    for c in 0..d {
        for i in 0..d {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * d + k] * y[k];
            }
            y[i] = s / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..d {
                s -= l[k * d + i] * inv[k * d + c];
            }
            inv[i * d + c] = s / l[i * d + i];
        }
    }
    inv
}

#[derive(Debug, Clone)]
pub(crate) struct MixtureComponent {
    pub(crate) mean: Vec<f64>,
    precision: Vec<f64>,
    trace_precision: f64,
    /// log w_k - ½ log det Σ_k - (d/2) log 2π
    log_norm: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct GaussianMixture {
    pub(crate) spec: MixtureSpec,
    pub(crate) components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    fn new(spec: MixtureSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim();
        let components = spec
            .weights
            .iter()
            .zip(spec.means.iter().zip(&spec.covariances))
            .map(|(&w, (mean, cov))| {
                let chol = cholesky(cov, d)?;
                let precision = spd_inverse(&chol, d);
                let log_det: f64 = (0..d).map(|i| 2.0 * chol[i * d + i].ln()).sum();
                Ok(MixtureComponent {
                    mean: mean.clone(),
                    trace_precision: (0..d).map(|i| precision[i * d + i]).sum(),
                    precision,
                    log_norm: w.ln() - 0.5 * log_det - 0.5 * d as f64 * (2.0 * PI).ln(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GaussianMixture { spec, components })
    }

    fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Log component densities (including weights) and, optionally, the
    /// per-component gradients `P_k (x - μ_k)` written into `grads`.
    fn log_terms(&self, x: &[f64], logs: &mut [f64], grads: Option<&mut [f64]>) {
        let d = self.dim();
        let mut grads = grads;
        for (k, c) in self.components.iter().enumerate() {
            let mut quad = 0.0;
            for i in 0..d {
                let mut g = 0.0;
                for j in 0..d {
                    g += c.precision[i * d + j] * (x[j] - c.mean[j]);
                }
                quad += (x[i] - c.mean[i]) * g;
                if let Some(gs) = grads.as_deref_mut() {
                    gs[k * d + i] = g;
                }
            }
            logs[k] = c.log_norm - 0.5 * quad;
        }
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let mut logs = vec![0.0; self.components.len()];
        self.log_terms(x, &mut logs, None);
        -log_sum_exp(&logs)
    }

    /// Fills `resp` with the responsibilities and `grads` with `P_k (x-μ_k)`.
    fn responsibilities(&self, x: &[f64], resp: &mut [f64], grads: &mut [f64]) {
        self.log_terms(x, resp, Some(grads));
        let lse = log_sum_exp(resp);
        for r in resp.iter_mut() {
            *r = (*r - lse).exp();
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let k = self.components.len();
        let mut resp = vec![0.0; k];
        let mut grads = vec![0.0; k * d];
        self.responsibilities(x, &mut resp, &mut grads);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (kk, r) in resp.iter().enumerate() {
            for i in 0..d {
                out[i] += r * grads[kk * d + i];
            }
        }
    }

    /// ΔU = Σ r_k tr P_k − Σ r_k |g_k|² + |Σ r_k g_k|².
    fn laplacian(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let k = self.components.len();
        let mut resp = vec![0.0; k];
        let mut grads = vec![0.0; k * d];
        self.responsibilities(x, &mut resp, &mut grads);
        let mut mean_g = vec![0.0; d];
        let mut lap = 0.0;
        for (kk, (r, c)) in resp.iter().zip(&self.components).enumerate() {
            let g = &grads[kk * d..(kk + 1) * d];
            lap += r * (c.trace_precision - g.iter().map(|v| v * v).sum::<f64>());
            for i in 0..d {
                mean_g[i] += r * g[i];
            }
        }
        lap + mean_g.iter().map(|v| v * v).sum::<f64>()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// `log(2 cosh x)` without overflow.
#[inline]
pub fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// `log(cosh x)` without overflow.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    log_2cosh(x) - LN_2
}

#[derive(Debug, Clone)]
pub(crate) enum Potential {
    QuadLogcosh { lambda: f64, epsilon: f64 },
    DoubleWell,
    Logistic,
    Mixture(GaussianMixture),
    Ou { lambda: f64 },
}

/// A potential with its gradient, optional closed-form drift flow and the
/// recipe for drawing exact reference samples.
#[derive(Debug, Clone)]
pub struct TargetModel {
    name: String,
    dim: usize,
    pub(crate) potential: Potential,
    recipe: ReferenceRecipe,
}

/// Builds `U(x) = (λ/2)x² + ε log(2 cosh x)`.
pub fn make_quadratic_logcosh(lambda: f64, epsilon: f64) -> Result<TargetModel> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", format!("must be nonnegative, got {epsilon}")));
    }
    Ok(TargetModel {
        name: "quad-logcosh".into(),
        dim: 1,
        potential: Potential::QuadLogcosh { lambda, epsilon },
        recipe: ReferenceRecipe::Rejection,
    })
}

/// Builds the quartic double well `U(x) = (x² − 1)²`.
pub fn make_double_well() -> TargetModel {
    TargetModel {
        name: "double-well".into(),
        dim: 1,
        potential: Potential::DoubleWell,
        recipe: ReferenceRecipe::Rejection,
    }
}

/// Builds the logistic target, `exp(-U) ∝ e^{-x} / (1 + e^{-x})²`.
pub fn make_logistic() -> TargetModel {
    TargetModel {
        name: "logistic".into(),
        dim: 1,
        potential: Potential::Logistic,
        recipe: ReferenceRecipe::InverseCdf,
    }
}

/// Builds the planar two-component Gaussian mixture benchmark.
pub fn make_mixture_2d() -> TargetModel {
    make_mixture(MixtureSpec::benchmark_2d(), "mog2d").expect("benchmark mixture is valid")
}

/// Builds `U = -log Σ w_k N(x; μ_k, Σ_k)` for an arbitrary mixture.
pub fn make_mixture(spec: MixtureSpec, name: &str) -> Result<TargetModel> {
    let mixture = GaussianMixture::new(spec)?;
    Ok(TargetModel {
        name: name.into(),
        dim: mixture.dim(),
        potential: Potential::Mixture(mixture),
        recipe: ReferenceRecipe::MixtureDirect,
    })
}

/// Builds the Ornstein–Uhlenbeck target `U(x) = (λ/2)x²`.
pub fn make_ou(lambda: f64) -> Result<TargetModel> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    Ok(TargetModel {
        name: "ou".into(),
        dim: 1,
        potential: Potential::Ou { lambda },
        recipe: ReferenceRecipe::GaussianExact,
    })
}

/// Names accepted by [`TargetModel::by_name`].
pub const TARGET_NAMES: [&str; 5] = ["quad-logcosh", "double-well", "logistic", "mog2d", "ou"];

impl TargetModel {
    /// Looks a target up by its CLI name, using the benchmark parameters
    /// (λ = 1, ε = 0.8 for the logcosh model, λ = 1 for OU).
    pub fn by_name(name: &str) -> Result<TargetModel> {
        match name {
            "quad-logcosh" => make_quadratic_logcosh(1.0, 0.8),
            "double-well" => Ok(make_double_well()),
            "logistic" => Ok(make_logistic()),
            "mog2d" => Ok(make_mixture_2d()),
            "ou" => make_ou(1.0),
            _ => Err(Error::Unknown {
                kind: "target",
                name: name.to_string(),
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reference_recipe(&self) -> ReferenceRecipe {
        self.recipe
    }

    /// OU stiffness, when this is the OU target.
    pub fn ou_lambda(&self) -> Option<f64> {
        match self.potential {
            Potential::Ou { lambda } => Some(lambda),
            _ => None,
        }
    }

    pub fn is_double_well(&self) -> bool {
        matches!(self.potential, Potential::DoubleWell)
    }

    pub(crate) fn mixture(&self) -> Option<&GaussianMixture> {
        match &self.potential {
            Potential::Mixture(m) => Some(m),
            _ => None,
        }
    }

    /// `U(x)`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        match &self.potential {
            Potential::QuadLogcosh { lambda, epsilon } => 0.5 * lambda * x[0] * x[0] + epsilon * log_2cosh(x[0]),
            Potential::DoubleWell => {
                let s = x[0] * x[0] - 1.0;
                s * s
            }
            Potential::Logistic => {
                let a = x[0].abs();
                a + 2.0 * (-a).exp().ln_1p()
            }
            Potential::Mixture(m) => m.potential(x),
            Potential::Ou { lambda } => 0.5 * lambda * x[0] * x[0],
        }
    }

    /// `∇U` for one-dimensional targets.
    #[inline]
    pub(crate) fn gradient_1d(&self, x: f64) -> f64 {
        match &self.potential {
            Potential::QuadLogcosh { lambda, epsilon } => lambda * x + epsilon * x.tanh(),
            Potential::DoubleWell => 4.0 * x * (x * x - 1.0),
            Potential::Logistic => (0.5 * x).tanh(),
            Potential::Ou { lambda } => lambda * x,
            Potential::Mixture(m) => {
                let mut out = [0.0];
                m.gradient(&[x], &mut out);
                out[0]
            }
        }
    }

    /// Writes `∇U(x)` into `out`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.potential {
            Potential::Mixture(m) => m.gradient(x, out),
            _ => out[0] = self.gradient_1d(x[0]),
        }
    }

    /// Writes the drift `b(x) = -∇U(x)` into `out`.
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.gradient(x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    /// `∇·b = -ΔU`.
    pub fn drift_divergence(&self, x: &[f64]) -> f64 {
        -match &self.potential {
            Potential::QuadLogcosh { lambda, epsilon } => {
                let c = 1.0 / x[0].cosh();
                lambda + epsilon * c * c
            }
            Potential::DoubleWell => 12.0 * x[0] * x[0] - 4.0,
            Potential::Logistic => {
                let c = 1.0 / (0.5 * x[0]).cosh();
                0.5 * c * c
            }
            Potential::Mixture(m) => m.laplacian(x),
            Potential::Ou { lambda } => *lambda,
        }
    }

    /// Unnormalized Gibbs density `exp(-β U(x))`.
    pub fn gibbs_weight(&self, x: &[f64], beta: f64) -> f64 {
        (-beta * self.potential(x)).exp()
    }

    pub fn has_drift_flow(&self) -> bool {
        matches!(self.potential, Potential::Ou { .. } | Potential::DoubleWell)
    }

    /// Applies the closed-form drift flow over time `h` in place: exact for
    /// OU, the analytic Strang composition for the double well. Returns
    /// `false` when the target has no such flow.
    #[inline]
    pub fn drift_flow(&self, x: &mut [f64], h: f64) -> bool {
        match self.potential {
            Potential::Ou { lambda } => {
                x[0] *= (-lambda * h).exp();
                true
            }
            Potential::DoubleWell => {
                x[0] = strang_dw_step(x[0], h);
                true
            }
            _ => false,
        }
    }

    /// Variance of the exact Gibbs law for OU at inverse temperature β.
    pub fn ou_stationary_variance(&self, beta: f64) -> Option<f64> {
        self.ou_lambda().map(|l| 1.0 / (beta * l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn all_targets() -> Vec<TargetModel> {
        TARGET_NAMES.iter().map(|n| TargetModel::by_name(n).unwrap()).collect()
    }

    fn grad(t: &TargetModel, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; t.dim()];
        t.gradient(x, &mut g);
        g
    }

    #[test]
    fn logcosh_examples() {
        let t = make_quadratic_logcosh(1.0, 0.8).unwrap();
        assert_eq!(grad(&t, &[0.0])[0], 0.0);
        assert_relative_eq!(grad(&t, &[1.0])[0], 1.609_275_324_764_611_9, epsilon = 1e-12);
        assert_relative_eq!(t.potential(&[0.0]), 0.554_517_744_447_956, epsilon = 1e-12);
        assert!(make_quadratic_logcosh(0.0, 0.8).is_err());
        assert!(make_quadratic_logcosh(-1.0, 0.8).is_err());
        assert!(make_quadratic_logcosh(1.0, -0.1).is_err());
    }

    #[test]
    fn double_well_examples() {
        let t = make_double_well();
        let mut b = [0.0];
        t.drift(&[1.0], &mut b);
        assert_eq!(b[0], 0.0);
        t.drift(&[0.5], &mut b);
        assert_relative_eq!(b[0], 1.5, epsilon = 1e-15);
        assert_eq!(t.potential(&[-1.0]), 0.0);
    }

    #[test]
    fn logistic_examples_and_stability() {
        let t = make_logistic();
        assert_eq!(grad(&t, &[0.0])[0], 0.0);
        assert_relative_eq!(grad(&t, &[2.0])[0], 0.761_594_155_955_764_9, epsilon = 1e-14);
        assert_relative_eq!(grad(&t, &[800.0])[0], 1.0);
        for x in [-50.0, 50.0, -800.0, 800.0] {
            assert!(t.potential(&[x]).is_finite());
        }
        // exp(-U) is proportional to the logistic density with constant 1.
        for x in [-3.0f64, -0.4, 0.0, 1.7, 6.0] {
            let pdf = (-x).exp() / (1.0 + (-x).exp()).powi(2);
            assert_relative_eq!(t.gibbs_weight(&[x], 1.0), pdf, max_relative = 1e-12);
        }
    }

    #[test]
    fn ou_examples() {
        let t = make_ou(1.0).unwrap();
        let mut x = [1.0];
        t.drift_flow(&mut x, 0.0);
        assert_eq!(x[0], 1.0);
        let mut x = [2.0];
        t.drift_flow(&mut x, 0.5);
        assert_relative_eq!(x[0], 1.213_061_319_425_267, epsilon = 1e-14);
        assert_eq!(t.ou_stationary_variance(1.0), Some(1.0));
        assert!(make_ou(0.0).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let step = 1e-5;
        for t in all_targets() {
            let d = t.dim();
            for _ in 0..100 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
                let g = grad(&t, &x);
                for i in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (t.potential(&xp) - t.potential(&xm)) / (2.0 * step);
                    let scale = g[i].abs().max(1.0);
                    assert!(
                        (fd - g[i]).abs() / scale <= 1e-6,
                        "{} at {x:?}: fd {fd} vs grad {}",
                        t.name(),
                        g[i]
                    );
                }
            }
        }
    }

    #[test]
    fn divergence_matches_differences_of_drift() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let step = 1e-5;
        for t in all_targets() {
            let d = t.dim();
            for _ in 0..50 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let mut fd = 0.0;
                for i in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let (mut bp, mut bm) = (vec![0.0; d], vec![0.0; d]);
                    t.drift(&xp, &mut bp);
                    t.drift(&xm, &mut bm);
                    fd += (bp[i] - bm[i]) / (2.0 * step);
                }
                let div = t.drift_divergence(&x);
                assert!((fd - div).abs() <= 1e-6 * div.abs().max(1.0), "{}", t.name());
            }
        }
    }

    #[test]
    fn mixture_density_integrates_to_one() {
        let t = make_mixture_2d();
        let n = 801;
        let h = 16.0 / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [-8.0 + i as f64 * h, -8.0 + j as f64 * h];
                total += t.gibbs_weight(&x, 1.0);
            }
        }
        assert!((total * h * h - 1.0).abs() < 1e-3, "mass {}", total * h * h);
        assert!(t.gibbs_weight(&[-2.0, 0.0], 1.0) >= t.gibbs_weight(&[0.0, 0.0], 1.0));
    }

    #[test]
    fn mixture_stationary_point_by_gradient_descent() {
        // Descend from the saddle region toward the left mode; the limit is a
        // critical point where the gradient must vanish.
        let t = make_mixture_2d();
        let mut x = [-1.0, 0.3];
        let mut g = [0.0; 2];
        for _ in 0..20_000 {
            t.gradient(&x, &mut g);
            x[0] -= 0.05 * g[0];
            x[1] -= 0.05 * g[1];
        }
        t.gradient(&x, &mut g);
        assert!((g[0] * g[0] + g[1] * g[1]).sqrt() <= 1e-8, "{x:?} {g:?}");
    }

    #[test]
    fn mixture_gradient_is_stable_far_from_modes() {
        let t = make_mixture_2d();
        let g = grad(&t, &[400.0, -300.0]);
        assert!(g.iter().all(|v| v.is_finite()));
        assert!(t.potential(&[400.0, -300.0]).is_finite());
    }

    #[test]
    fn invalid_mixtures_are_rejected() {
        let mut spec = MixtureSpec::benchmark_2d();
        spec.weights = vec![0.7, 0.7];
        assert!(spec.validate().is_err());
        let mut spec = MixtureSpec::benchmark_2d();
        spec.covariances[1] = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(make_mixture(spec, "bad"), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn ou_flow_composes_exactly() {
        let t = make_ou(1.3).unwrap();
        for &x0 in &[-2.0, 0.3, 5.0] {
            for &h in &[0.01, 0.2, 1.0] {
                let mut a = [x0];
                t.drift_flow(&mut a, h);
                t.drift_flow(&mut a, h);
                let mut b = [x0];
                t.drift_flow(&mut b, 2.0 * h);
                assert!((a[0] - b[0]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn strang_flow_composition_defect_is_third_order() {
        let t = make_double_well();
        let x0 = 0.7;
        let defect = |h: f64| {
            let mut a = [x0];
            t.drift_flow(&mut a, h);
            t.drift_flow(&mut a, h);
            let mut b = [x0];
            t.drift_flow(&mut b, 2.0 * h);
            (a[0] - b[0]).abs()
        };
        let (e1, e2) = (defect(0.02), defect(0.01));
        assert!(e1 <= 50.0 * 0.02f64.powi(3));
        let ratio = e1 / e2;
        assert!((6.0..10.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn drift_flow_ode_residual_vanishes_under_refinement() {
        // (φ_h(x) − φ_{h−δ}(x))/δ − b(φ_h(x)) = O(δ) for the exact OU flow.
        let t = make_ou(1.0).unwrap();
        let (x0, h) = (1.5, 0.4);
        let residual = |delta: f64| {
            let mut a = [x0];
            t.drift_flow(&mut a, h);
            let mut b = [x0];
            t.drift_flow(&mut b, h - delta);
            let mut drift = [0.0];
            t.drift(&a, &mut drift);
            ((a[0] - b[0]) / delta - drift[0]).abs()
        };
        let (r1, r2) = (residual(1e-3), residual(5e-4));
        assert!(r1 < 1e-2);
        assert!((1.8..2.2).contains(&(r1 / r2)));
    }
}
