use std::fmt::Write as _;

use serde::Serialize;

use super::spec::ExperimentSpec;
use crate::error::{Error, Result};
use crate::samplers::Scheme;

/// Header of every convergence CSV.
pub const CSV_HEADER: &str = "tau,kl,kl_stderr,w1,w1_stderr";

/// Fewest usable rows for which a report carries a fitted slope.
pub const MIN_SLOPE_ROWS: usize = 3;

/// One step size of a study. Missing metrics are left empty in the CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub tau: f64,
    pub kl: Option<f64>,
    pub kl_stderr: Option<f64>,
    pub w1: Option<f64>,
    pub w1_stderr: Option<f64>,
}

/// Ordinary least squares of `log y` on `log τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
    pub n_points: usize,
    /// Points dropped for a nonpositive or non-finite value.
    pub excluded: usize,
}

/// Fits `log y = intercept + slope · log τ`, skipping nonpositive values.
/// Two points are enough for a (zero-residual) fit.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, y)| *t > 0.0 && *y > 0.0 && t.is_finite() && y.is_finite())
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    let n = usable.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("{n} usable point(s); a slope needs two")));
    }
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all step sizes are equal".into()));
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (sse / n as f64).sqrt(),
        n_points: n,
        excluded: points.len() - n,
    })
}

/// Result of a step-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub target: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub replicates: usize,
    pub rows: Vec<ReportRow>,
    pub kl_slope: Option<SlopeFit>,
    pub w1_slope: Option<SlopeFit>,
    pub warnings: Vec<String>,
    pub wall_time_seconds: f64,
    pub spec: Option<ExperimentSpec>,
}

fn field(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl ConvergenceReport {
    pub fn new(name: &str, target: &str, scheme: Scheme, seed: u64, replicates: usize) -> Self {
        ConvergenceReport {
            name: name.to_string(),
            target: target.to_string(),
            scheme,
            seed,
            replicates,
            rows: Vec::new(),
            kl_slope: None,
            w1_slope: None,
            warnings: Vec::new(),
            wall_time_seconds: 0.0,
            spec: None,
        }
    }

    fn fit_metric(&mut self, label: &str, get: impl Fn(&ReportRow) -> Option<f64>) -> Option<SlopeFit> {
        let points: Vec<(f64, f64)> = self.rows.iter().filter_map(|r| get(r).map(|v| (r.tau, v))).collect();
        if points.is_empty() {
            return None;
        }
        let usable = points.iter().filter(|p| p.1 > 0.0 && p.1.is_finite()).count();
        if usable < points.len() {
            self.warnings.push(format!(
                "{} nonpositive {label} value(s) excluded from the slope fit",
                points.len() - usable
            ));
        }
        if usable < MIN_SLOPE_ROWS {
            self.warnings.push(format!(
                "{label} slope not reported: {usable} usable row(s), need {MIN_SLOPE_ROWS}"
            ));
            return None;
        }
        fit_loglog_slope(&points).ok()
    }

    /// Recomputes both slopes from the rows, recording warnings for
    /// skipped fits and excluded rows.
    pub fn fit_slopes(&mut self) {
        self.kl_slope = self.fit_metric("kl", |r| r.kl);
        self.w1_slope = self.fit_metric("w1", |r| r.w1);
        if !self.kl_monotone() {
            self.warnings
                .push("kl is not monotone in tau beyond the statistical floor".into());
        }
    }

    /// Whether KL shrinks with τ, tolerating one inversion between the two
    /// smallest step sizes.
    pub fn kl_monotone(&self) -> bool {
        let mut pts: Vec<(f64, f64)> = self.rows.iter().filter_map(|r| r.kl.map(|k| (r.tau, k))).collect();
        pts.sort_by(|a, b| b.0.total_cmp(&a.0));
        let n = pts.len();
        pts.windows(2).enumerate().all(|(i, w)| w[1].1 <= w[0].1 || i + 2 == n)
    }

    /// CSV in the fixed column order, floats as shortest round-trip
    /// decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.tau,
                field(r.kl),
                field(r.kl_stderr),
                field(r.w1),
                field(r.w1_stderr)
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
