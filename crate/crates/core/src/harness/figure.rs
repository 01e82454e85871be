//! Self-contained SVG rendering of a convergence report on log–log axes.

use std::fmt::Write as _;

use super::report::ConvergenceReport;

#[derive(Debug, Clone, PartialEq)]
pub struct FigureStyle {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
}

impl Default for FigureStyle {
    fn default() -> Self {
        FigureStyle {
            width: 640.0,
            height: 480.0,
            title: None,
        }
    }
}

const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Axes {
    fn px(&self, log_x: f64) -> f64 {
        self.left + (log_x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)
    }

    fn py(&self, log_y: f64) -> f64 {
        self.bottom - (log_y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Decade bounds enclosing `[lo, hi]` (log10 values), at least one decade
/// wide.
fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.floor(), hi.ceil());
    if b > a {
        (a, b)
    } else {
        (a - 0.5, a + 0.5)
    }
}

/// Renders the KL column of `report` (W1 when no KL is present) against τ
/// with markers, a connecting line, standard-error bars and dashed `τ²`
/// and `τ⁴` references through the coarsest-τ point.
pub fn emit_figure(report: &ConvergenceReport, style: &FigureStyle) -> String {
    let use_kl = report.rows.iter().any(|r| r.kl.is_some());
    let label = if use_kl { "KL divergence" } else { "W1 distance" };
    let mut pts: Vec<(f64, f64, Option<f64>)> = report
        .rows
        .iter()
        .filter_map(|r| {
            let (v, se) = if use_kl {
                (r.kl, r.kl_stderr)
            } else {
                (r.w1, r.w1_stderr)
            };
            v.filter(|v| *v > 0.0 && r.tau > 0.0).map(|v| (r.tau, v, se))
        })
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut svg = String::new();
    let (w, h) = (style.width, style.height);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let title = style
        .title
        .clone()
        .unwrap_or_else(|| format!("{} ({}, {})", report.name, report.target, report.scheme));
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (MARGIN_L + w - MARGIN_R) / 2.0,
        escape(&title)
    );

    if pts.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">no positive data</text>"#,
            w / 2.0,
            h / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let with_refs = pts.len() >= 2;
    let (t0, v0, _) = pts[0];
    let reference = |p: i32, t: f64| v0 * (t / t0).powi(p);
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    if with_refs {
        let t_min = pts[pts.len() - 1].0;
        ys.push(reference(2, t_min).log10());
        ys.push(reference(4, t_min).log10());
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    let (x0, x1) = decades(
        fold(&xs, f64::min, f64::INFINITY),
        fold(&xs, f64::max, f64::NEG_INFINITY),
    );
    let (y0, y1) = decades(
        fold(&ys, f64::min, f64::INFINITY),
        fold(&ys, f64::max, f64::NEG_INFINITY),
    );
    let ax = Axes {
        x0,
        x1,
        y0,
        y1,
        left: MARGIN_L,
        right: w - MARGIN_R,
        top: MARGIN_T,
        bottom: h - MARGIN_B,
    };

    let _ = writeln!(
        svg,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        ax.left,
        ax.top,
        ax.right - ax.left,
        ax.bottom - ax.top
    );
    for k in (x0 as i32)..=(x1 as i32) {
        let x = ax.px(k as f64);
        if x < ax.left - 0.5 || x > ax.right + 0.5 {
            continue;
        }
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">1e{k}</text>",
            ax.bottom,
            ax.bottom - 6.0,
            ax.bottom + 18.0
        );
    }
    for k in (y0 as i32)..=(y1 as i32) {
        let y = ax.py(k as f64);
        if y < ax.top - 0.5 || y > ax.bottom + 0.5 {
            continue;
        }
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{k}</text>",
            ax.left,
            ax.left + 6.0,
            ax.left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">step size τ</text>"#,
        (ax.left + ax.right) / 2.0,
        h - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{label}</text>"#,
        (ax.top + ax.bottom) / 2.0,
        (ax.top + ax.bottom) / 2.0
    );

    let mut legend = vec![("data", "black", "")];
    if with_refs {
        let t_min = pts[pts.len() - 1].0;
        for (p, colour) in [(2, "#1f77b4"), (4, "#d62728")] {
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-dasharray="6 4"/>"#,
                ax.px(t0.log10()),
                ax.py(v0.log10()),
                ax.px(t_min.log10()),
                ax.py(reference(p, t_min).log10())
            );
        }
        legend.push(("τ²", "#1f77b4", "6 4"));
        legend.push(("τ⁴", "#d62728", "6 4"));
        let path: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", ax.px(p.0.log10()), ax.py(p.1.log10())))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="black"/>"#,
            path.join(" ")
        );
    }
    for &(t, v, se) in &pts {
        let (x, y) = (ax.px(t.log10()), ax.py(v.log10()));
        if let Some(se) = se.filter(|s| *s > 0.0) {
            let hi = ax.py((v + se).log10());
            let lo = if v - se > 0.0 {
                ax.py((v - se).log10())
            } else {
                ax.bottom
            };
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{hi:.2}" x2="{x:.2}" y2="{lo:.2}" stroke="black"/>"#
            );
        }
        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="black"/>"#);
    }

    let lx = ax.right + 15.0;
    for (i, (name, colour, dash)) in legend.iter().enumerate() {
        let y = ax.top + 15.0 + 20.0 * i as f64;
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{dash}""#)
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}"{dash_attr}/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            lx + 30.0,
            lx + 36.0,
            y + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
