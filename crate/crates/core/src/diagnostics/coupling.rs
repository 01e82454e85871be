//! Reflection coupling of two random splitting chains sharing their order
//! coins, used to measure the contraction rate of `E f(|X_n − Y_n|)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{Domain, Stream};
use crate::samplers::{with_workers, DriftIntegrator, Kernel, SamplerConfig, Scheme, Scratch, CHUNK};
use crate::stats;
use crate::targets::TargetModel;

/// Steps skipped before the rate fit and the monotonicity check.
pub const BURN_IN: usize = 10;

/// Window length of the monotonicity check.
pub const MONOTONE_WINDOW: usize = 20;

/// The rate fit stops once `E f` drops below this fraction of its value at
/// the end of the burn-in, where only a handful of pairs remain uncoupled.
pub const FIT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingParams {
    pub c_f: f64,
    pub r1: f64,
    /// Distance below which a pair counts as coupled.
    pub couple_threshold: f64,
    pub tau: f64,
    pub beta: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub drift_integrator: DriftIntegrator,
    pub n_workers: usize,
}

impl CouplingParams {
    /// Defaults `c_f = 4`, `R₁ = 3`, `δ_c = 10⁻⁶ √(2τ/β)`.
    pub fn new(target: &TargetModel, tau: f64, beta: f64, n_steps: usize, x0: Vec<f64>, y0: Vec<f64>) -> Self {
        CouplingParams {
            c_f: 4.0,
            r1: 3.0,
            couple_threshold: 1e-6 * (2.0 * tau / beta).sqrt(),
            tau,
            beta,
            n_steps,
            seed: 0,
            x0,
            y0,
            drift_integrator: DriftIntegrator::default_for(target),
            n_workers: 1,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, n_workers: usize) -> Self {
        self.n_workers = n_workers;
        self
    }

    pub fn validate(&self, target: &TargetModel) -> Result<()> {
        for (name, v) in [
            ("c_f", self.c_f),
            ("r1", self.r1),
            ("couple_threshold", self.couple_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.x0.len() != target.dim() || self.y0.len() != target.dim() {
            return Err(Error::param("x0", "starting points must match the target dimension"));
        }
        Ok(())
    }
}

/// `f(r) = ∫₀^r exp(−c_f min(s, R₁)) ds`.
pub fn eberle_f(r: f64, c_f: f64, r1: f64) -> f64 {
    if r <= r1 {
        -(-c_f * r).exp_m1() / c_f
    } else {
        -(-c_f * r1).exp_m1() / c_f + (r - r1) * (-c_f * r1).exp()
    }
}

/// `(I − 2êêᵀ) z` for a unit vector `ê`.
pub fn reflect(e: &[f64], z: &[f64]) -> Vec<f64> {
    let dot: f64 = e.iter().zip(z).map(|(a, b)| a * b).sum();
    z.iter().zip(e).map(|(zi, ei)| zi - 2.0 * dot * ei).collect()
}

/// Least-squares contraction rate with its 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub half_width: f64,
    /// Steps `[start, end)` the fit used.
    pub start: usize,
    pub end: usize,
}

/// Per-step averages over all pairs, for steps `0..=n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTrace {
    pub tau: f64,
    pub n_pairs: usize,
    pub mean_distance: Vec<f64>,
    pub mean_f: Vec<f64>,
    pub coupled_fraction: Vec<f64>,
    pub fit: Option<RateFit>,
}

impl CouplingTrace {
    /// `λ̂`, or NaN when too few informative steps were available.
    pub fn rate(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.rate)
    }

    /// Whether every `MONOTONE_WINDOW`-step average of `E f` after the
    /// burn-in is below the previous one, over the fitted range.
    pub fn window_monotone(&self) -> bool {
        let Some(fit) = self.fit else {
            return false;
        };
        let averages: Vec<f64> = self.mean_f[fit.start..fit.end]
            .chunks_exact(MONOTONE_WINDOW)
            .map(stats::mean)
            .collect();
        averages.windows(2).all(|w| w[1] < w[0])
    }

    /// CSV with one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean_distance,mean_f,coupled_fraction\n");
        for n in 0..self.mean_f.len() {
            out.push_str(&format!(
                "{n},{},{},{}\n",
                self.mean_distance[n], self.mean_f[n], self.coupled_fraction[n]
            ));
        }
        out
    }
}

fn fit_rate(mean_f: &[f64], tau: f64) -> Option<RateFit> {
    let start = BURN_IN.min(mean_f.len());
    let floor = FIT_FLOOR * mean_f.get(start).copied().unwrap_or(0.0);
    let tail = (mean_f.len() / 10).max(1);
    let plateau = stats::mean(&mean_f[mean_f.len() - tail..]);
    let threshold = (10.0 * plateau).max(floor);
    let end = mean_f[start..]
        .iter()
        .position(|&v| !(v > threshold))
        .map_or(mean_f.len(), |k| start + k);
    if end < start + 3 {
        return None;
    }
    let xs: Vec<f64> = (start..end).map(|n| n as f64).collect();
    let ys: Vec<f64> = mean_f[start..end].iter().map(|v| v.ln()).collect();
    let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = (sse / (xs.len() as f64 - 2.0) / sxx).sqrt();
    Some(RateFit {
        rate: -slope / tau,
        half_width: 1.96 * se / tau,
        start,
        end,
    })
}

struct Sums {
    distance: Vec<f64>,
    f: Vec<f64>,
    coupled: Vec<u64>,
}

/// Runs `m` reflection-coupled pairs from `(x0, y0)` for `n_steps` random
/// splitting steps.
///
/// Both chains of a pair use the same order coin and the same Gaussian
/// vector, reflected across the hyperplane orthogonal to `X − Y` for `Y`.
/// During the kick the distance moves as a Brownian motion with variance
/// rate `8/β`, so a pair couples when the kicked distance is nonpositive,
/// falls below `δ_c`, or the Brownian bridge between the two distances hits
/// zero (probability `exp(−β r r' / (4τ))`). Coupled pairs move together.
pub fn reflection_coupling_run(target: &TargetModel, params: &CouplingParams, m: usize) -> Result<CouplingTrace> {
    params.validate(target)?;
    if m == 0 {
        return Err(Error::param("m", "at least one pair is needed"));
    }
    let cfg = SamplerConfig::new(target, Scheme::Rslmc, params.tau, params.n_steps as u64, m)
        .with_beta(params.beta)
        .with_seed(params.seed)
        .with_integrator(params.drift_integrator);
    let kernel = Kernel::new(&cfg, target)?;
    let d = target.dim();
    let n = params.n_steps;
    let kick = kernel.kick_scale();
    let starts: Vec<usize> = (0..m).step_by(CHUNK).collect();

    let chunk_sums: Vec<std::result::Result<Sums, (usize, u64)>> = with_workers(params.n_workers, || {
        starts
            .par_iter()
            .map(|&first| {
                let len = CHUNK.min(m - first);
                let mut xs: Vec<f64> = params.x0.iter().copied().cycle().take(len * d).collect();
                let mut ys: Vec<f64> = params.y0.iter().copied().cycle().take(len * d).collect();
                let mut coupled = vec![false; len];
                let mut sums = Sums {
                    distance: vec![0.0; n + 1],
                    f: vec![0.0; n + 1],
                    coupled: vec![0; n + 1],
                };
                let mut s = Scratch::new(d);
                let mut e = vec![0.0; d];
                for step in 0..=n {
                    if step > 0 {
                        for j in 0..len {
                            let pair = (first + j) as u64;
                            let x = &mut xs[j * d..(j + 1) * d];
                            let y = &mut ys[j * d..(j + 1) * d];
                            let mut rng = Stream::new(params.seed, pair, step as u64 - 1, Domain::Coupling);
                            let drift_first = rng.random::<f64>() <= 0.5;
                            for zi in s.z.iter_mut() {
                                *zi = rng.sample(StandardNormal);
                            }
                            let bridge: f64 = rng.random();
                            if drift_first {
                                kernel.drift(x, false, &mut s);
                                if !coupled[j] {
                                    kernel.drift(y, false, &mut s);
                                }
                            }
                            if coupled[j] {
                                kernel.kick(x, &s.z);
                            } else {
                                let r = distance(x, y);
                                for i in 0..d {
                                    e[i] = (x[i] - y[i]) / r;
                                }
                                let dot: f64 = e.iter().zip(&s.z).map(|(a, b)| a * b).sum();
                                let r_next = r + 2.0 * kick * dot;
                                let hit = r_next <= params.couple_threshold
                                    || bridge < (-params.beta * r * r_next / (4.0 * params.tau)).exp();
                                kernel.kick(x, &s.z);
                                if hit {
                                    coupled[j] = true;
                                } else {
                                    for i in 0..d {
                                        y[i] += kick * (s.z[i] - 2.0 * dot * e[i]);
                                    }
                                }
                            }
                            if !drift_first {
                                kernel.drift(x, false, &mut s);
                                if !coupled[j] {
                                    kernel.drift(y, false, &mut s);
                                }
                            }
                            if coupled[j] {
                                y.copy_from_slice(x);
                            } else if distance(x, y) <= params.couple_threshold {
                                coupled[j] = true;
                                y.copy_from_slice(x);
                            }
                            if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
                                return Err((first + j, step as u64));
                            }
                        }
                    } else {
                        for j in 0..len {
                            if distance(&xs[j * d..(j + 1) * d], &ys[j * d..(j + 1) * d]) <= params.couple_threshold {
                                coupled[j] = true;
                            }
                        }
                    }
                    for j in 0..len {
                        let r = if coupled[j] {
                            0.0
                        } else {
                            distance(&xs[j * d..(j + 1) * d], &ys[j * d..(j + 1) * d])
                        };
                        sums.distance[step] += r;
                        sums.f[step] += eberle_f(r, params.c_f, params.r1);
                        sums.coupled[step] += coupled[j] as u64;
                    }
                }
                Ok(sums)
            })
            .collect()
    });

    let mut distance_total = vec![0.0; n + 1];
    let mut f_total = vec![0.0; n + 1];
    let mut coupled_total = vec![0u64; n + 1];
    let mut failure: Option<(usize, u64)> = None;
    for sums in chunk_sums {
        match sums {
            Ok(s) => {
                for k in 0..=n {
                    distance_total[k] += s.distance[k];
                    f_total[k] += s.f[k];
                    coupled_total[k] += s.coupled[k];
                }
            }
            Err(bad) => failure = Some(failure.map_or(bad, |f| f.min(bad))),
        }
    }
    if let Some((particle, step)) = failure {
        return Err(Error::Divergence { particle, step });
    }
    let mf = m as f64;
    let mean_f: Vec<f64> = f_total.iter().map(|v| v / mf).collect();
    Ok(CouplingTrace {
        tau: params.tau,
        n_pairs: m,
        mean_distance: distance_total.iter().map(|v| v / mf).collect(),
        fit: fit_rate(&mean_f, params.tau),
        mean_f,
        coupled_fraction: coupled_total.iter().map(|&c| c as f64 / mf).collect(),
    })
}

#[inline]
fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}
