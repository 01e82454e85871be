//! Exact law propagation for the Ornstein–Uhlenbeck potential
//! `U(x) = λx²/2` with the exact drift flow `x ↦ e^{−λτ}x`.
//!
//! Under every scheme one step maps a Gaussian `N(m, v)` to Gaussians with
//! mean `e^{−λτ}m` (or `(1 − λτ)m` for Euler) and an affine variance update.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::samplers::Scheme;

/// Coefficients `(A, B)` of the variance update `v ← A v + B`.
///
/// For the random splitting scheme these are the averages of the two
/// orders, which is exact for the mean variance because both maps are
/// affine with the same slope.
pub fn ou_variance_map(lambda: f64, beta: f64, tau: f64, scheme: Scheme) -> (f64, f64) {
    let a = (-lambda * tau).exp();
    let a2 = a * a;
    let noise = 2.0 * tau / beta;
    match scheme {
        Scheme::LieTrotterDriftFirst => (a2, noise),
        Scheme::LieTrotterDiffusionFirst => (a2, a2 * noise),
        Scheme::Rslmc => (a2, 0.5 * (1.0 + a2) * noise),
        Scheme::StrangSymmetric => (a2, a * noise),
        Scheme::LmcEuler => {
            let c = 1.0 - lambda * tau;
            (c * c, noise)
        }
    }
}

/// Variance after `n` steps and the fixed point of the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuVariance {
    pub variance: f64,
    pub fixed_point: f64,
}

fn check(lambda: f64, beta: f64, tau: f64) -> Result<()> {
    for (name, v) in [("lambda", lambda), ("beta", beta), ("tau", tau)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Iterates the mean-variance update of `scheme` `n` times from `v0`.
///
/// The fixed point is `+∞` when the update is not contractive (Euler with
/// `λτ ≥ 2`).
pub fn ou_mean_variance_recursion(
    v0: f64,
    lambda: f64,
    beta: f64,
    tau: f64,
    n: u64,
    scheme: Scheme,
) -> Result<OuVariance> {
    check(lambda, beta, tau)?;
    if !(v0 >= 0.0) {
        return Err(Error::param("v0", format!("must be nonnegative, got {v0}")));
    }
    let (a, b) = ou_variance_map(lambda, beta, tau, scheme);
    let mut v = v0;
    for _ in 0..n {
        v = a * v + b;
    }
    let fixed_point = if a < 1.0 { b / (1.0 - a) } else { f64::INFINITY };
    Ok(OuVariance {
        variance: v,
        fixed_point,
    })
}

/// Closed-form fixed point of the mean variance under `scheme`.
pub fn ou_fixed_point(lambda: f64, beta: f64, tau: f64, scheme: Scheme) -> Result<f64> {
    Ok(ou_mean_variance_recursion(0.0, lambda, beta, tau, 0, scheme)?.fixed_point)
}

/// The law of one chain as a Gaussian mixture with a common mean.
///
/// Each random splitting step doubles the number of components (one per
/// order). Past `max_components`, neighbouring components are merged in
/// variance order, which preserves total weight and mean variance.
#[derive(Debug, Clone, PartialEq)]
pub struct OuLawState {
    pub mean: f64,
    pub components: Vec<(f64, f64)>,
    lambda: f64,
    beta: f64,
    tau: f64,
    max_components: usize,
}

impl OuLawState {
    pub fn new(mean: f64, variance: f64, lambda: f64, beta: f64, tau: f64) -> Result<Self> {
        check(lambda, beta, tau)?;
        Ok(OuLawState {
            mean,
            components: vec![(variance, 1.0)],
            lambda,
            beta,
            tau,
            max_components: 1 << 12,
        })
    }

    pub fn with_max_components(mut self, n: usize) -> Self {
        self.max_components = n.max(1);
        self
    }

    pub fn step(&mut self, scheme: Scheme) {
        let a = (-self.lambda * self.tau).exp();
        let noise = 2.0 * self.tau / self.beta;
        match scheme {
            Scheme::Rslmc => {
                self.components = self
                    .components
                    .iter()
                    .flat_map(|&(v, w)| [(a * a * v + noise, 0.5 * w), (a * a * (v + noise), 0.5 * w)])
                    .collect();
                self.merge();
            }
            _ => {
                let (ca, cb) = ou_variance_map(self.lambda, self.beta, self.tau, scheme);
                self.components.iter_mut().for_each(|c| c.0 = ca * c.0 + cb);
            }
        }
        self.mean *= if scheme == Scheme::LmcEuler {
            1.0 - self.lambda * self.tau
        } else {
            a
        };
    }

    fn merge(&mut self) {
        if self.components.len() <= self.max_components {
            return;
        }
        self.components.sort_by(|x, y| x.0.total_cmp(&y.0));
        self.components = self
            .components
            .chunks(2)
            .map(|pair| {
                let w: f64 = pair.iter().map(|c| c.1).sum();
                let v = pair.iter().map(|c| c.0 * c.1).sum::<f64>() / w;
                (v, w)
            })
            .collect();
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.1).sum()
    }

    /// Weight-averaged variance `Σ wᵢ vᵢ`.
    pub fn mean_variance(&self) -> f64 {
        self.components.iter().map(|c| c.0 * c.1).sum()
    }

    /// Second moment of the mixture.
    pub fn second_moment(&self) -> f64 {
        self.mean_variance() + self.mean * self.mean
    }
}
