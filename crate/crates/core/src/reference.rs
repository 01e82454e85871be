//! Exact samples from each target's Gibbs law `∝ exp(−β U)`.
//!
//! All draws use per-draw counter streams, so a reference set is a
//! deterministic function of `(seed, m)` regardless of the worker count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{Domain, Stream};
use crate::samplers::{with_workers, CHUNK};
use crate::targets::{log_cosh, MixtureSpec, Potential, ReferenceRecipe, TargetModel};

pub type ReferenceMethod = ReferenceRecipe;

/// Smallest uniform accepted by the inverse CDF (2⁻⁵³).
pub const UNIFORM_GUARD: f64 = 1.0 / 9_007_199_254_740_992.0;

/// Proposal attempts allowed per accepted rejection draw.
const MAX_ATTEMPTS: u64 = 1 << 20;

const MAX_MIXTURE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSampleSet {
    /// Row-major `m × dim`.
    pub samples: Vec<f64>,
    pub dim: usize,
    pub target_name: String,
    pub method: ReferenceMethod,
    pub seed: u64,
    /// Accepted / proposed, recorded for rejection sampling only.
    pub acceptance_rate: Option<f64>,
}

impl ReferenceSampleSet {
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Logistic quantile `log(u / (1 − u))`, with `u` clamped to `[2⁻⁵³, 1 − 2⁻⁵³]`.
pub fn logistic_quantile(u: f64) -> f64 {
    let u = u.clamp(UNIFORM_GUARD, 1.0 - UNIFORM_GUARD);
    (u / (1.0 - u)).ln()
}

/// Logistic CDF `1 / (1 + e^{−x})`.
pub fn logistic_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn per_draw<F>(m: usize, dim: usize, n_workers: usize, draw: F) -> Vec<f64>
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let mut out = vec![0.0; m * dim];
    if m == 0 {
        return out;
    }
    with_workers(n_workers, || {
        out.par_chunks_mut(CHUNK * dim).enumerate().for_each(|(ci, chunk)| {
            for (j, row) in chunk.chunks_mut(dim).enumerate() {
                draw((ci * CHUNK + j) as u64, row);
            }
        })
    });
    out
}

/// Inverse-CDF draws from the standard logistic law.
pub fn sample_logistic_inverse_cdf(m: usize, seed: u64) -> ReferenceSampleSet {
    let samples = per_draw(m, 1, 1, |i, row| {
        let mut rng = Stream::new(seed, i, 0, Domain::Reference);
        row[0] = logistic_quantile(rng.random());
    });
    ReferenceSampleSet {
        samples,
        dim: 1,
        target_name: "logistic".into(),
        method: ReferenceRecipe::InverseCdf,
        seed,
        acceptance_rate: None,
    }
}

/// One-dimensional Gaussian proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProposal {
    pub mean: f64,
    pub std: f64,
}

impl GaussianProposal {
    /// `log q̃(x)` without the normalizing constant.
    fn log_kernel(&self, x: f64) -> f64 {
        let u = (x - self.mean) / self.std;
        -0.5 * u * u
    }
}

/// Bound `K` with `exp(−βU) ≤ K q̃` used to turn proposals into accepted draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// For `U = (λ/2)x² + ε log(2 cosh x)` with proposal `N(0, 1/(βλ))`
    /// the acceptance ratio is exactly `(cosh x)^{−βε}`.
    LogcoshAnalytic { beta: f64, epsilon: f64 },
    /// `log K` for the generic ratio `exp(−βU(x)) / (K q̃(x))`.
    LogBound(f64),
}

/// Certifies `log K` as the maximum of `−βU − log q̃` over a uniform grid on
/// `[lo, hi]` with `n` points, inflated by `margin` (1.1 = 10%).
pub fn certify_envelope(
    target: &TargetModel,
    proposal: GaussianProposal,
    beta: f64,
    (lo, hi): (f64, f64),
    n: usize,
    margin: f64,
) -> Result<f64> {
    if target.dim() != 1 {
        return Err(Error::Config(
            "rejection sampling supports one-dimensional targets".into(),
        ));
    }
    if n < 2 || !(hi > lo) {
        return Err(Error::param("envelope grid", "needs n ≥ 2 and hi > lo"));
    }
    let h = (hi - lo) / (n - 1) as f64;
    let max = (0..n)
        .map(|i| {
            let x = lo + i as f64 * h;
            -beta * target.potential(&[x]) - proposal.log_kernel(x)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(max + margin.ln())
}

/// Proposal and envelope used by default for a rejection-sampled target.
pub fn default_rejection_setup(target: &TargetModel, beta: f64) -> Result<(GaussianProposal, Envelope)> {
    match &target.potential {
        Potential::QuadLogcosh { lambda, epsilon } => Ok((
            GaussianProposal {
                mean: 0.0,
                std: 1.0 / (beta * lambda).sqrt(),
            },
            Envelope::LogcoshAnalytic {
                beta,
                epsilon: *epsilon,
            },
        )),
        Potential::DoubleWell => {
            let proposal = GaussianProposal { mean: 0.0, std: 0.8 };
            let log_k = certify_envelope(target, proposal, beta, (-4.0, 4.0), 100_000, 1.1)?;
            Ok((proposal, Envelope::LogBound(log_k)))
        }
        Potential::Ou { lambda } => {
            let proposal = GaussianProposal {
                mean: 0.0,
                std: (2.0 / (beta * lambda)).sqrt(),
            };
            let log_k = certify_envelope(target, proposal, beta, (-10.0, 10.0), 100_000, 1.1)?;
            Ok((proposal, Envelope::LogBound(log_k)))
        }
        _ => Err(Error::Config(format!(
            "no Gaussian rejection envelope is available for `{}`",
            target.name()
        ))),
    }
}

/// Rejection sampling of `exp(−βU)` from a Gaussian proposal.
pub fn rejection_sample(
    target: &TargetModel,
    proposal: GaussianProposal,
    envelope: Envelope,
    beta: f64,
    m: usize,
    seed: u64,
    n_workers: usize,
) -> Result<ReferenceSampleSet> {
    if target.dim() != 1 {
        return Err(Error::Config(
            "rejection sampling supports one-dimensional targets".into(),
        ));
    }
    let ratio = |x: f64| -> f64 {
        match envelope {
            Envelope::LogcoshAnalytic { beta, epsilon } => (-beta * epsilon * log_cosh(x)).exp(),
            Envelope::LogBound(log_k) => (-beta * target.potential(&[x]) - proposal.log_kernel(x) - log_k).exp(),
        }
    };
    let mut samples = vec![0.0; m];
    let outcomes: Vec<std::result::Result<u64, Error>> = with_workers(n_workers, || {
        samples
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut attempts = 0u64;
                for (j, slot) in chunk.iter_mut().enumerate() {
                    let i = (ci * CHUNK + j) as u64;
                    let mut accepted = false;
                    for a in 0..MAX_ATTEMPTS {
                        let mut rng = Stream::new(seed, i, a, Domain::Reference);
                        let z: f64 = rng.sample(StandardNormal);
                        let x = proposal.mean + proposal.std * z;
                        let r = ratio(x);
                        if r > 1.0 {
                            return Err(Error::EnvelopeViolation { x: vec![x], ratio: r });
                        }
                        attempts += 1;
                        if rng.random::<f64>() < r {
                            *slot = x;
                            accepted = true;
                            break;
                        }
                    }
                    if !accepted {
                        return Err(Error::Degenerate(format!(
                            "no acceptance within {MAX_ATTEMPTS} proposals"
                        )));
                    }
                }
                Ok(attempts)
            })
            .collect()
    });
    let mut attempts = 0u64;
    for o in outcomes {
        attempts += o?;
    }
    Ok(ReferenceSampleSet {
        samples,
        dim: 1,
        target_name: target.name().into(),
        method: ReferenceRecipe::Rejection,
        seed,
        acceptance_rate: Some(if attempts == 0 { 1.0 } else { m as f64 / attempts as f64 }),
    })
}

/// `μ_k + L_k z` for component `k`.
pub fn mixture_component_draw(spec: &MixtureSpec, k: usize, z: &[f64]) -> Result<Vec<f64>> {
    let d = spec.dim();
    let l = crate::targets::cholesky(&spec.covariances[k], d)?;
    Ok((0..d)
        .map(|i| spec.means[k][i] + (0..=i).map(|j| l[i * d + j] * z[j]).sum::<f64>())
        .collect())
}

/// Direct draws from a Gaussian mixture: component by weight, then
/// `μ_k + L_k z`.
pub fn sample_mixture(spec: &MixtureSpec, m: usize, seed: u64, target_name: &str) -> Result<ReferenceSampleSet> {
    spec.validate()?;
    let d = spec.dim();
    if d > MAX_MIXTURE_DIM {
        return Err(Error::Config(format!(
            "mixture sampling supports up to {MAX_MIXTURE_DIM} dimensions"
        )));
    }
    let chols = spec
        .covariances
        .iter()
        .map(|c| crate::targets::cholesky(c, d))
        .collect::<Result<Vec<_>>>()?;
    let samples = per_draw(m, d, 1, |i, row| {
        let mut rng = Stream::new(seed, i, 0, Domain::Reference);
        let u: f64 = rng.random();
        let mut k = spec.weights.len() - 1;
        let mut acc = 0.0;
        for (kk, w) in spec.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = kk;
                break;
            }
        }
        let mut z = [0.0f64; MAX_MIXTURE_DIM];
        let z = &mut z[..d];
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let l = &chols[k];
        for a in 0..d {
            row[a] = spec.means[k][a] + (0..=a).map(|b| l[a * d + b] * z[b]).sum::<f64>();
        }
    });
    Ok(ReferenceSampleSet {
        samples,
        dim: d,
        target_name: target_name.into(),
        method: ReferenceRecipe::MixtureDirect,
        seed,
        acceptance_rate: None,
    })
}

/// Direct draws from the planar benchmark mixture (or any valid spec).
pub fn sample_mixture_2d(spec: &MixtureSpec, m: usize, seed: u64) -> Result<ReferenceSampleSet> {
    sample_mixture(spec, m, seed, "mog2d")
}

/// I.i.d. `N(0, 1/(βλ))` draws.
pub fn sample_ou_exact(lambda: f64, beta: f64, m: usize, seed: u64) -> Result<ReferenceSampleSet> {
    if !(lambda > 0.0) || !(beta > 0.0) {
        return Err(Error::param("lambda/beta", "must be positive"));
    }
    let sd = 1.0 / (beta * lambda).sqrt();
    let samples = per_draw(m, 1, 1, |i, row| {
        let mut rng = Stream::new(seed, i, 0, Domain::Reference);
        row[0] = sd * rng.sample::<f64, _>(StandardNormal);
    });
    Ok(ReferenceSampleSet {
        samples,
        dim: 1,
        target_name: "ou".into(),
        method: ReferenceRecipe::GaussianExact,
        seed,
        acceptance_rate: None,
    })
}

/// Draws `m` reference samples for `target` with its own recipe, or with
/// `method` when given.
pub fn reference_for(
    target: &TargetModel,
    beta: f64,
    m: usize,
    seed: u64,
    method: Option<ReferenceMethod>,
    n_workers: usize,
) -> Result<ReferenceSampleSet> {
    let method = method.unwrap_or_else(|| target.reference_recipe());
    let unsupported = || {
        Err(Error::Config(format!(
            "reference method `{method}` is not available for `{}`",
            target.name()
        )))
    };
    match method {
        ReferenceRecipe::Rejection => {
            let (proposal, envelope) = default_rejection_setup(target, beta)?;
            rejection_sample(target, proposal, envelope, beta, m, seed, n_workers)
        }
        ReferenceRecipe::InverseCdf => match target.potential {
            Potential::Logistic if beta == 1.0 => Ok(sample_logistic_inverse_cdf(m, seed)),
            _ => unsupported(),
        },
        ReferenceRecipe::MixtureDirect => match target.mixture() {
            Some(mix) if beta == 1.0 => sample_mixture(&mix.spec, m, seed, target.name()),
            _ => unsupported(),
        },
        ReferenceRecipe::GaussianExact => match target.ou_lambda() {
            Some(lambda) => sample_ou_exact(lambda, beta, m, seed),
            None => unsupported(),
        },
    }
}
