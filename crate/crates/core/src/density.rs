//! Gaussian kernel density estimates on uniform grids and the divergences
//! computed from them.
//!
//! KDE values are accumulated sample-by-sample into per-chunk partial grids
//! and summed in chunk order, so the result is independent of the number of
//! worker threads.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::samplers::with_workers;
use crate::stats::{self, sorted_quantile};

/// Floor applied inside logarithms.
pub const KL_FLOOR: f64 = 1e-12;

/// Kernel contributions farther than this many bandwidths are dropped.
pub const KERNEL_RADIUS: f64 = 8.0;

const KDE_CHUNK: usize = 16_384;
const KDE_BATCH: usize = 32;

/// One uniform axis `start + i·step`, `i < n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    /// `n` nodes from `lo` to `hi` inclusive.
    pub fn spanning(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n_nodes", "a grid axis needs at least two nodes"));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Degenerate(format!("axis bounds [{lo}, {hi}]")));
        }
        Ok(Axis {
            start: lo,
            step: (hi - lo) / (n - 1) as f64,
            n,
        })
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.node(self.n - 1)
    }

    /// Index range of nodes within `[x − r, x + r]`, clipped to the axis.
    #[inline]
    fn window(&self, x: f64, r: f64) -> std::ops::Range<usize> {
        let lo = ((x - r - self.start) / self.step).ceil();
        let hi = ((x + r - self.start) / self.step).floor();
        if hi < 0.0 || lo > (self.n - 1) as f64 || !lo.is_finite() || !hi.is_finite() {
            return 0..0;
        }
        let lo = lo.max(0.0) as usize;
        let hi = (hi as usize).min(self.n - 1);
        lo..hi + 1
    }
}

/// A tensor grid of uniform axes with one nonnegative value per node.
///
/// Values are stored row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    axes: Vec<Axis>,
    values: Vec<f64>,
}

impl DensityGrid {
    /// A zero-valued grid over the given axes.
    pub fn new(axes: Vec<Axis>) -> Self {
        let size = axes.iter().map(|a| a.n).product();
        DensityGrid {
            axes,
            values: vec![0.0; size],
        }
    }

    /// One-dimensional grid of `n` nodes on `[lo, hi]`.
    pub fn fixed_1d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Ok(DensityGrid::new(vec![Axis::spanning(lo, hi, n)?]))
    }

    /// Grid over `axes` holding `f` evaluated at every node.
    pub fn from_fn(axes: Vec<Axis>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut grid = DensityGrid::new(axes);
        let mut x = vec![0.0; grid.dim()];
        for idx in 0..grid.values.len() {
            grid.node_into(idx, &mut x);
            grid.values[idx] = f(&x);
        }
        grid
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Product of axis spacings.
    pub fn cell_measure(&self) -> f64 {
        self.axes.iter().map(|a| a.step).product()
    }

    /// Writes the coordinates of flat node `idx` into `x`.
    pub fn node_into(&self, mut idx: usize, x: &mut [f64]) {
        for (k, axis) in self.axes.iter().enumerate().rev() {
            x[k] = axis.node(idx % axis.n);
            idx /= axis.n;
        }
    }

    /// `Σ values · cell_measure`.
    pub fn mass(&self) -> f64 {
        stats::pairwise_sum(&self.values) * self.cell_measure()
    }

    /// Rescales so that the grid integrates to one.
    pub fn normalize(&mut self) -> Result<()> {
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Degenerate(format!("grid mass {mass} cannot be normalized")));
        }
        self.values.iter_mut().for_each(|v| *v /= mass);
        Ok(())
    }

    fn same_nodes(&self, other: &DensityGrid) -> bool {
        self.axes == other.axes
    }

    /// CSV with one row per node: axis coordinates then the value.
    pub fn to_csv(&self) -> String {
        let names = ["x", "y", "z"];
        let mut out = String::new();
        for k in 0..self.dim() {
            let name = names.get(k).map_or_else(|| format!("x{k}"), |s| s.to_string());
            out.push_str(&name);
            out.push(',');
        }
        out.push_str("density\n");
        let mut x = vec![0.0; self.dim()];
        for (idx, v) in self.values.iter().enumerate() {
            self.node_into(idx, &mut x);
            for c in &x {
                let _ = write!(out, "{c},");
            }
            let _ = writeln!(out, "{v}");
        }
        out
    }
}

/// Bandwidth and its multiplier for a Gaussian KDE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeParams {
    pub bandwidth: f64,
    pub bandwidth_scale: f64,
    pub dim: usize,
}

impl KdeParams {
    /// Silverman bandwidth from `samples`, times `scale`.
    pub fn silverman(samples: &[f64], dim: usize, scale: f64) -> Result<Self> {
        Ok(KdeParams {
            bandwidth: silverman_bandwidth(samples, dim)?,
            bandwidth_scale: scale,
            dim,
        })
    }

    /// The kernel width actually used.
    pub fn effective(&self) -> f64 {
        self.bandwidth * self.bandwidth_scale
    }
}

/// Silverman's rule `h = σ (4 / ((d + 2) M))^{1/(d+4)}`, with σ the sample
/// standard deviation (averaged over axes when `d > 1`).
pub fn silverman_bandwidth(samples: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || !samples.len().is_multiple_of(dim) {
        return Err(Error::param("dim", "sample array is not a multiple of the dimension"));
    }
    let m = samples.len() / dim;
    if m < 2 {
        return Err(Error::Degenerate("at least two samples are needed".into()));
    }
    let sigma = (0..dim)
        .map(|k| {
            let axis: Vec<f64> = samples.iter().skip(k).step_by(dim).copied().collect();
            stats::variance(&axis).sqrt()
        })
        .sum::<f64>()
        / dim as f64;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Degenerate(format!("sample standard deviation is {sigma}")));
    }
    let d = dim as f64;
    Ok(sigma * (4.0 / ((d + 2.0) * m as f64)).powf(1.0 / (d + 4.0)))
}

fn accumulate_chunk(samples: &[f64], axes: &[Axis], h: f64, out: &mut [f64]) {
    let r = KERNEL_RADIUS * h;
    let inv = 1.0 / (2.0 * h * h);
    match axes {
        [ax] => {
            for &x in samples {
                for i in ax.window(x, r) {
                    let u = ax.node(i) - x;
                    out[i] += (-u * u * inv).exp();
                }
            }
        }
        [ax, ay] => {
            let mut wy = Vec::new();
            for p in samples.chunks_exact(2) {
                let (wxr, wyr) = (ax.window(p[0], r), ay.window(p[1], r));
                if wxr.is_empty() || wyr.is_empty() {
                    continue;
                }
                wy.clear();
                wy.extend(wyr.clone().map(|j| {
                    let u = ay.node(j) - p[1];
                    (-u * u * inv).exp()
                }));
                for i in wxr {
                    let u = ax.node(i) - p[0];
                    let wx = (-u * u * inv).exp();
                    let row = &mut out[i * ay.n + wyr.start..i * ay.n + wyr.end];
                    for (o, w) in row.iter_mut().zip(&wy) {
                        *o += wx * w;
                    }
                }
            }
        }
        _ => {
            let d = axes.len();
            let mut x = vec![0.0; d];
            for idx in 0..out.len() {
                let mut rem = idx;
                for (k, axis) in axes.iter().enumerate().rev() {
                    x[k] = axis.node(rem % axis.n);
                    rem /= axis.n;
                }
                out[idx] += samples
                    .chunks_exact(d)
                    .map(|p| {
                        let q: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                        if q <= r * r {
                            (-q * inv).exp()
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>();
            }
        }
    }
}

/// `(1/(M h^d)) Σ (2π)^{−d/2} exp(−‖x − X_j‖² / (2h²))` at every node of
/// `grid`, without normalization.
pub fn kde_evaluate_unnormalized(
    samples: &[f64],
    params: &KdeParams,
    grid: &DensityGrid,
    n_workers: usize,
) -> Result<DensityGrid> {
    let d = grid.dim();
    if params.dim != d || !samples.len().is_multiple_of(d) {
        return Err(Error::GridMismatch(format!(
            "samples of dimension {} on a {d}-dimensional grid",
            params.dim
        )));
    }
    let h = params.effective();
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::param("bandwidth", format!("must be positive, got {h}")));
    }
    let m = samples.len() / d;
    if m == 0 {
        return Err(Error::Degenerate("no samples".into()));
    }
    let chunks: Vec<&[f64]> = samples.chunks(KDE_CHUNK * d).collect();
    let mut total = vec![0.0; grid.len()];
    with_workers(n_workers, || {
        for batch in chunks.chunks(KDE_BATCH) {
            let partials: Vec<Vec<f64>> = batch
                .par_iter()
                .map(|chunk| {
                    let mut part = vec![0.0; grid.len()];
                    accumulate_chunk(chunk, &grid.axes, h, &mut part);
                    part
                })
                .collect();
            for part in &partials {
                for (t, p) in total.iter_mut().zip(part) {
                    *t += p;
                }
            }
        }
    });
    let scale = (2.0 * PI).powf(-0.5 * d as f64) / (m as f64 * h.powi(d as i32));
    total.iter_mut().for_each(|v| *v *= scale);
    Ok(DensityGrid {
        axes: grid.axes.clone(),
        values: total,
    })
}

/// Gaussian KDE at every node of `grid`, normalized to unit grid mass.
pub fn kde_evaluate(samples: &[f64], params: &KdeParams, grid: &DensityGrid, n_workers: usize) -> Result<DensityGrid> {
    let mut out = kde_evaluate_unnormalized(samples, params, grid, n_workers)?;
    out.normalize()?;
    Ok(out)
}

/// Uniform grid between the empirical `q_lo` and `q_hi` quantiles of each
/// coordinate (a tensor grid when `dim > 1`).
pub fn build_quantile_grid(samples: &[f64], dim: usize, n_nodes: usize, q_lo: f64, q_hi: f64) -> Result<DensityGrid> {
    if !(q_lo < q_hi) || q_lo < 0.0 || q_hi > 1.0 {
        return Err(Error::param(
            "quantiles",
            format!("need 0 ≤ q_lo < q_hi ≤ 1, got [{q_lo}, {q_hi}]"),
        ));
    }
    if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
        return Err(Error::Degenerate("no samples to take quantiles from".into()));
    }
    let axes = (0..dim)
        .map(|k| {
            let mut axis: Vec<f64> = samples.iter().skip(k).step_by(dim).copied().collect();
            stats::sort_floats(&mut axis);
            Axis::spanning(sorted_quantile(&axis, q_lo), sorted_quantile(&axis, q_hi), n_nodes)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityGrid::new(axes))
}

/// `Σ p log(max(p, ε) / max(q, ε)) · cell` on a shared grid.
pub fn kl_divergence_grid(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    if !p.same_nodes(q) {
        return Err(Error::GridMismatch("KL needs both densities on the same nodes".into()));
    }
    let terms: Vec<f64> = p
        .values
        .iter()
        .zip(&q.values)
        .map(|(&pi, &qi)| {
            if pi <= 0.0 {
                0.0
            } else {
                pi * (pi.max(KL_FLOOR) / qi.max(KL_FLOOR)).ln()
            }
        })
        .collect();
    Ok(stats::pairwise_sum(&terms) * p.cell_measure())
}

/// Wasserstein-1 distance between two one-dimensional empirical measures.
///
/// For equal sizes this is the mean absolute difference of order
/// statistics; otherwise `∫ |F_a − F_b|` is evaluated exactly over the
/// merged support.
pub fn w1_sorted_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("W1 of an empty sample set".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    stats::sort_floats(&mut a);
    stats::sort_floats(&mut b);
    if a.len() == b.len() {
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
        return Ok(stats::mean(&diffs));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

/// Mean of `‖x‖^p` over row-major samples of dimension `dim`.
pub fn empirical_moment(samples: &[f64], dim: usize, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param("p", format!("moment order must be ≥ 1, got {p}")));
    }
    if dim == 0 || !samples.len().is_multiple_of(dim) {
        return Err(Error::param("dim", "sample array is not a multiple of the dimension"));
    }
    if samples.is_empty() {
        return Ok(0.0);
    }
    let norms: Vec<f64> = if dim == 1 {
        samples.iter().map(|x| x.abs().powf(p)).collect()
    } else {
        samples
            .chunks_exact(dim)
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().powf(0.5 * p))
            .collect()
    };
    Ok(stats::mean(&norms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Domain, Stream};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(m: usize, seed: u64) -> Vec<f64> {
        (0..m)
            .map(|i| Stream::new(seed, i as u64, 0, Domain::Reference).sample(StandardNormal))
            .collect()
    }

    fn gaussian_grid(lo: f64, hi: f64, n: usize, var: f64) -> DensityGrid {
        let mut g = DensityGrid::from_fn(vec![Axis::spanning(lo, hi, n).unwrap()], |x| {
            (-0.5 * x[0] * x[0] / var).exp() / (2.0 * PI * var).sqrt()
        });
        g.normalize().unwrap();
        g
    }

    #[test]
    fn silverman_examples() {
        // direct evaluation of the closed form at σ = 1
        let h = (4.0f64 / 3.0 / 10_000.0).powf(0.2);
        assert_relative_eq!(h, 0.167_875_665_497_077_5, epsilon = 1e-15);
        let unit: Vec<f64> = {
            let mut xs = normals(10_000, 1);
            let m = stats::mean(&xs);
            let s = stats::variance(&xs).sqrt();
            xs.iter_mut().for_each(|x| *x = (*x - m) / s);
            xs
        };
        assert_relative_eq!(silverman_bandwidth(&unit, 1).unwrap(), h, epsilon = 1e-12);
        let scaled: Vec<f64> = unit.iter().map(|x| 2.5 * x).collect();
        assert_relative_eq!(silverman_bandwidth(&scaled, 1).unwrap(), 2.5 * h, epsilon = 1e-12);
        // d = 2: 4/(d+2) = 1 so h = σ M^{-1/6}
        assert_relative_eq!((1.0f64 / 1e6).powf(1.0 / 6.0), 0.1, epsilon = 1e-15);
        assert!(silverman_bandwidth(&[1.0, 1.0, 1.0], 1).is_err());
        assert!(silverman_bandwidth(&[1.0], 1).is_err());
    }

    #[test]
    fn kde_peak_and_symmetry() {
        let grid = DensityGrid::fixed_1d(-2.0, 2.0, 41).unwrap();
        let params = KdeParams {
            bandwidth: 0.3,
            bandwidth_scale: 1.0,
            dim: 1,
        };
        let raw = kde_evaluate_unnormalized(&[0.0], &params, &grid, 1).unwrap();
        assert_relative_eq!(raw.values()[20], 1.0 / ((2.0 * PI).sqrt() * 0.3), epsilon = 1e-14);

        let est = kde_evaluate(&[-0.37, 0.37], &params, &grid, 1).unwrap();
        let v = est.values();
        for i in 0..v.len() {
            assert!((v[i] - v[v.len() - 1 - i]).abs() <= 1e-12);
        }

        let grid2 = DensityGrid::new(vec![
            Axis::spanning(-1.0, 1.0, 21).unwrap(),
            Axis::spanning(-1.0, 1.0, 11).unwrap(),
        ]);
        let params2 = KdeParams {
            bandwidth: 0.2,
            bandwidth_scale: 1.0,
            dim: 2,
        };
        let raw = kde_evaluate_unnormalized(&[0.0, 0.0], &params2, &grid2, 1).unwrap();
        assert_relative_eq!(raw.values()[10 * 11 + 5], 1.0 / (2.0 * PI * 0.04), epsilon = 1e-12);
    }

    #[test]
    fn kde_normalizes_and_is_worker_independent() {
        let xs = normals(50_000, 4);
        let grid = build_quantile_grid(&xs, 1, 512, 1e-4, 1.0 - 1e-4).unwrap();
        let params = KdeParams::silverman(&xs, 1, 2.0).unwrap();
        let a = kde_evaluate(&xs, &params, &grid, 1).unwrap();
        let b = kde_evaluate(&xs, &params, &grid, 3).unwrap();
        assert_eq!(a, b);
        assert!((a.mass() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn kde_recovers_standard_normal() {
        let xs = normals(1_000_000, 5);
        let grid = DensityGrid::fixed_1d(-4.0, 4.0, 512).unwrap();
        let params = KdeParams::silverman(&xs, 1, 1.0).unwrap();
        let est = kde_evaluate(&xs, &params, &grid, 1).unwrap();
        let mut x = [0.0];
        let err = est
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                est.node_into(i, &mut x);
                (v - (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 0.01, "sup error {err}");
    }

    #[test]
    fn kde_error_shrinks_with_sample_size() {
        let sup_err = |m: usize| {
            let xs = normals(m, 6);
            let grid = DensityGrid::fixed_1d(-4.0, 4.0, 256).unwrap();
            let params = KdeParams::silverman(&xs, 1, 1.0).unwrap();
            let est = kde_evaluate(&xs, &params, &grid, 1).unwrap();
            let mut x = [0.0];
            est.values()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    est.node_into(i, &mut x);
                    (v - (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (sup_err(10_000), sup_err(1_000_000));
        assert!(coarse >= 3.0 * fine, "{coarse} vs {fine}");
    }

    #[test]
    fn quantile_grid_examples() {
        let g = build_quantile_grid(&[0.0, 0.25, 0.5, 0.75, 1.0], 1, 2, 0.0, 1.0).unwrap();
        assert_eq!(g.axes()[0].node(0), 0.0);
        assert_eq!(g.axes()[0].node(1), 1.0);
        assert!(build_quantile_grid(&[0.0, 1.0], 1, 8, 0.6, 0.4).is_err());
        let pts = [0.0, 10.0, 1.0, 20.0, 2.0, 30.0];
        let g = build_quantile_grid(&pts, 2, 300, 0.0, 1.0).unwrap();
        assert_eq!(g.len(), 90_000);
        assert_eq!(g.axes()[1].end(), 30.0);
    }

    #[test]
    fn gaussian_kl_on_fine_grid() {
        let p = gaussian_grid(-8.0, 8.0, 4096, 1.0);
        let q = gaussian_grid(-8.0, 8.0, 4096, 1.1);
        let exact = 0.5 * (1.1f64.ln() + 1.0 / 1.1 - 1.0);
        assert_relative_eq!(exact, 0.002_200_544_447_616_97, epsilon = 1e-15);
        let kl = kl_divergence_grid(&p, &q).unwrap();
        assert!((kl - exact).abs() <= 1e-4);
        assert!(kl_divergence_grid(&p, &p).unwrap().abs() <= 1e-15);
        let other = gaussian_grid(-8.0, 8.0, 4095, 1.0);
        assert!(matches!(kl_divergence_grid(&p, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn w1_examples() {
        assert_eq!(w1_sorted_1d(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(w1_sorted_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert!(w1_sorted_1d(&[], &[1.0]).is_err());
        // unequal sizes: {0, 1} vs {0.5} → ∫|F_a − F_b| = 0.5·0.5 + 0.5·0.5
        assert_relative_eq!(w1_sorted_1d(&[0.0, 1.0], &[0.5]).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn w1_detects_translation() {
        let n = 1_000_000;
        let a = normals(n, 10);
        let b: Vec<f64> = normals(n, 11).iter().map(|x| x + 0.5).collect();
        let w = w1_sorted_1d(&a, &b).unwrap();
        // W1 ≥ |mean difference|; the sampling error of the mean difference
        // is √(2/n).
        let se = (2.0 / n as f64).sqrt();
        assert!((w - 0.5).abs() <= 3.0 * se, "{w}");
    }

    #[test]
    fn moment_examples() {
        let xs = normals(1_000_000, 12);
        let m2 = empirical_moment(&xs, 1, 2.0).unwrap();
        let se = (2.0f64 / 1e6).sqrt();
        assert!((m2 - 1.0).abs() <= 3.0 * se);
        let two_d = normals(2_000_000, 13);
        let m2 = empirical_moment(&two_d, 2, 2.0).unwrap();
        // ‖x‖² ~ χ²₂ with variance 4
        assert!((m2 - 2.0).abs() <= 3.0 * (4.0f64 / 1e6).sqrt());
        assert_eq!(empirical_moment(&[0.0; 10], 1, 4.0).unwrap(), 0.0);
        let c = 1.7;
        let scaled: Vec<f64> = xs[..1000].iter().map(|x| c * x).collect();
        assert_relative_eq!(
            empirical_moment(&scaled, 1, 3.0).unwrap(),
            c.powi(3) * empirical_moment(&xs[..1000], 1, 3.0).unwrap(),
            max_relative = 1e-12
        );
        assert!(empirical_moment(&xs, 1, 0.5).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = DensityGrid::from_fn(vec![Axis::spanning(0.0, 1.0, 3).unwrap()], |x| x[0]);
        assert_eq!(g.to_csv(), "x,density\n0,0\n0.5,0.5\n1,1\n");
        let g2 = DensityGrid::new(vec![
            Axis::spanning(0.0, 1.0, 2).unwrap(),
            Axis::spanning(0.0, 1.0, 2).unwrap(),
        ]);
        assert!(g2.to_csv().starts_with("x,y,density\n0,0,0\n0,1,0\n"));
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(raw_p in prop::collection::vec(1e-6f64..1.0, 32), raw_q in prop::collection::vec(1e-6f64..1.0, 32)) {
            let axes = vec![Axis::spanning(0.0, 3.1, 32).unwrap()];
            let mut p = DensityGrid::from_fn(axes.clone(), |_| 0.0);
            p.values.copy_from_slice(&raw_p);
            p.normalize().unwrap();
            let mut q = DensityGrid::from_fn(axes, |_| 0.0);
            q.values.copy_from_slice(&raw_q);
            q.normalize().unwrap();
            prop_assert!(kl_divergence_grid(&p, &q).unwrap() >= -1e-12);
            prop_assert!(kl_divergence_grid(&p, &p).unwrap().abs() <= 1e-12);
        }

        #[test]
        fn w1_is_a_metric(
            a in prop::collection::vec(-10.0f64..10.0, 20),
            b in prop::collection::vec(-10.0f64..10.0, 20),
            c in prop::collection::vec(-10.0f64..10.0, 20),
        ) {
            let ab = w1_sorted_1d(&a, &b).unwrap();
            let ba = w1_sorted_1d(&b, &a).unwrap();
            let bc = w1_sorted_1d(&b, &c).unwrap();
            let ac = w1_sorted_1d(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!(w1_sorted_1d(&a, &a).unwrap() == 0.0);
        }

        #[test]
        fn w1_unequal_sizes_match_replication(a in prop::collection::vec(-5.0f64..5.0, 1..12), b in prop::collection::vec(-5.0f64..5.0, 1..12)) {
            // replicating each point k times leaves the empirical law unchanged
            let lcm = a.len() * b.len();
            let ra: Vec<f64> = a.iter().flat_map(|&x| std::iter::repeat_n(x, lcm / a.len())).collect();
            let rb: Vec<f64> = b.iter().flat_map(|&x| std::iter::repeat_n(x, lcm / b.len())).collect();
            let direct = w1_sorted_1d(&a, &b).unwrap();
            let replicated = w1_sorted_1d(&ra, &rb).unwrap();
            prop_assert!((direct - replicated).abs() <= 1e-9);
        }
    }
}
