//! Hand-written SVG plots on log-log axes.

use std::fmt::Write as _;
use std::path::Path;

use hklab_core::Regime;

use crate::experiment::{fit_exponent, Predictor, ReportRow};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `k` between the lower and upper templates against `t`, at one node.
    Sandwich,
    /// `k` against `t` at one node with the fitted power law.
    Exponent,
    /// The `(t, d)` plane coloured by regime.
    RegimeMap,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Sandwich => "sandwich",
            PlotKind::Exponent => "exponent",
            PlotKind::RegimeMap => "regime_map",
        }
    }
}

/// What a plot needs beyond the rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotMeta {
    /// Node for the sandwich and exponent plots.
    pub node: usize,
    pub m: usize,
    /// Start of the long regime.
    pub seam: f64,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Log-log frame mapping data to pixels.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: impl IntoIterator<Item = f64>, ys: impl IntoIterator<Item = f64>) -> Frame {
        Frame {
            x: decades(xs),
            y: decades(ys),
        }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v.log10() - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v.log10() - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            out,
            r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y1 - y0
        );
        let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, WIDTH / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 10.0
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0
        );
        for e in ticks(self.x) {
            let p = self.px(10f64.powi(e));
            let _ = writeln!(out, r#"<line x1="{p:.2}" y1="{y1}" x2="{p:.2}" y2="{}" stroke="black"/>"#, y1 + 5.0);
            let _ = writeln!(out, r#"<text x="{p:.2}" y="{}" text-anchor="middle" font-size="11">1e{e}</text>"#, y1 + 18.0);
        }
        for e in ticks(self.y) {
            let p = self.py(10f64.powi(e));
            let _ = writeln!(out, r#"<line x1="{}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="black"/>"#, x0 - 5.0);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">1e{e}</text>"#, x0 - 8.0, p + 4.0);
        }
    }

    fn polyline(&self, out: &mut String, id: &str, color: &str, dash: bool, pts: &[(f64, f64)]) {
        let points: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.3},{:.3}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline id="{id}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"{}/>"#,
            points.join(" "),
            if dash { r#" stroke-dasharray="6 4""# } else { "" }
        );
    }
}

/// Decade-aligned `[lo, hi]` of `log10` over the positive finite values.
fn decades(vs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vs
        .into_iter()
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v.log10()), b.max(v.log10())));
    let (lo, hi) = (lo.floor(), hi.ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, lo + 1.0)
    }
}

fn ticks((lo, hi): (f64, f64)) -> Vec<i32> {
    let step = ((hi - lo) / 8.0).ceil().max(1.0) as i32;
    (lo as i32..=hi as i32).step_by(step as usize).collect()
}

fn document(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn at_node(rows: &[ReportRow], node: usize) -> Vec<&ReportRow> {
    let mut sel: Vec<&ReportRow> = rows.iter().filter(|r| r.node == node && r.is_ok()).collect();
    sel.sort_by(|a, b| a.t.total_cmp(&b.t));
    sel
}

fn sandwich(rows: &[ReportRow], meta: &PlotMeta) -> Result<String, HarnessError> {
    let sel: Vec<&ReportRow> = at_node(rows, meta.node)
        .into_iter()
        .filter(|r| r.upper > 0.0 && r.lower_template > 0.0 && r.k > 0.0)
        .collect();
    if sel.len() < 2 {
        return Err(HarnessError::Plot(format!(
            "sandwich needs at least two rows with bounds at node {}, got {}",
            meta.node,
            sel.len()
        )));
    }
    let frame = Frame::fit(
        sel.iter().map(|r| r.t),
        sel.iter().flat_map(|r| [r.lower_template, r.k, r.upper]),
    );
    let mut body = String::new();
    let x = sel[0].x;
    frame.axes(&mut body, &format!("kernel sandwich at x = {x:.4}"), "t", "k(t,x,x)");
    let curve = |f: fn(&ReportRow) -> f64| sel.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();
    frame.polyline(&mut body, "lower", "#2ca02c", true, &curve(|r| r.lower_template));
    frame.polyline(&mut body, "kernel", "black", false, &curve(|r| r.k));
    frame.polyline(&mut body, "upper", "#d62728", true, &curve(|r| r.upper));
    for r in sel.iter().filter(|r| r.bootstrap_lower > 0.0) {
        let _ = writeln!(
            body,
            r##"<circle class="bootstrap" cx="{:.3}" cy="{:.3}" r="3" fill="#1f77b4"/>"##,
            frame.px(r.t),
            frame.py(r.bootstrap_lower)
        );
    }
    legend(
        &mut body,
        &[("lower template", "#2ca02c"), ("k", "black"), ("upper template", "#d62728"), ("bootstrap", "#1f77b4")],
    );
    Ok(document(&body))
}

fn exponent(rows: &[ReportRow], meta: &PlotMeta) -> Result<String, HarnessError> {
    let sel: Vec<ReportRow> = at_node(rows, meta.node)
        .into_iter()
        .filter(|r| r.k > 0.0)
        .cloned()
        .collect();
    let window = match (sel.first(), sel.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(HarnessError::Plot(format!("no rows at node {}", meta.node))),
    };
    let (slope, stderr) = fit_exponent(&sel, Predictor::Time, window)?;
    // intercept through the centroid in log space
    let n = sel.len() as f64;
    let lx = sel.iter().map(|r| r.t.ln()).sum::<f64>() / n;
    let ly = sel.iter().map(|r| r.k.ln()).sum::<f64>() / n;
    let line = |t: f64| (ly + slope * (t.ln() - lx)).exp();
    let frame = Frame::fit(
        sel.iter().map(|r| r.t),
        sel.iter().map(|r| r.k).chain([line(window.0), line(window.1)]),
    );
    let mut body = String::new();
    frame.axes(&mut body, &format!("slope {slope:.4} ± {stderr:.1e}"), "t", "k(t,x,x)");
    for r in &sel {
        let _ = writeln!(
            body,
            r#"<circle class="sample" cx="{:.3}" cy="{:.3}" r="3" fill="black"/>"#,
            frame.px(r.t),
            frame.py(r.k)
        );
    }
    frame.polyline(
        &mut body,
        "fit",
        "#d62728",
        false,
        &[(window.0, line(window.0)), (window.1, line(window.1))],
    );
    let _ = writeln!(body, r#"<desc id="slope">{slope:.16e}</desc>"#);
    Ok(document(&body))
}

fn regime_color(r: Regime) -> &'static str {
    match r {
        Regime::Short => "#1f77b4",
        Regime::Mid => "#ff7f0e",
        Regime::Long => "#2ca02c",
    }
}

fn regime_map(rows: &[ReportRow], meta: &PlotMeta) -> Result<String, HarnessError> {
    let sel: Vec<(&ReportRow, Regime)> = rows
        .iter()
        .filter_map(|r| r.regime.map(|g| (r, g)))
        .filter(|(r, _)| r.d > 0.0)
        .collect();
    if sel.is_empty() {
        return Err(HarnessError::Plot("regime map needs rows with a regime".into()));
    }
    let frame = Frame::fit(
        sel.iter().map(|(r, _)| r.t).chain([meta.seam]),
        sel.iter().map(|(r, _)| r.d),
    );
    let mut body = String::new();
    frame.axes(&mut body, "regimes", "t", "d(x)");
    for (r, g) in &sel {
        let _ = writeln!(
            body,
            r#"<circle class="{}" cx="{:.3}" cy="{:.3}" r="3" fill="{}"/>"#,
            g.as_str(),
            frame.px(r.t),
            frame.py(r.d),
            regime_color(*g)
        );
    }
    // t = d^{2m}, drawn over the visible d range
    let (d0, d1) = (10f64.powf(frame.y.0), 10f64.powf(frame.y.1));
    let two_m = 2.0 * meta.m as f64;
    let curve: Vec<(f64, f64)> = (0..=64)
        .map(|i| {
            let d = d0 * (d1 / d0).powf(i as f64 / 64.0);
            (d.powf(two_m), d)
        })
        .filter(|(t, _)| t.log10() >= frame.x.0 && t.log10() <= frame.x.1)
        .collect();
    if curve.len() >= 2 {
        frame.polyline(&mut body, "boundary-short-mid", "gray", true, &curve);
    }
    let p = frame.px(meta.seam);
    let _ = writeln!(
        body,
        r#"<line id="boundary-seam" data-t="{:.16e}" x1="{p:.3}" y1="{TOP}" x2="{p:.3}" y2="{}" stroke="gray" stroke-dasharray="6 4"/>"#,
        meta.seam,
        HEIGHT - BOTTOM
    );
    legend(
        &mut body,
        &[
            ("short", regime_color(Regime::Short)),
            ("mid", regime_color(Regime::Mid)),
            ("long", regime_color(Regime::Long)),
        ],
    );
    Ok(document(&body))
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = WIDTH - RIGHT - 130.0;
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y}" font-size="12">{label}</text>"#, x + 16.0);
    }
}

pub fn render_svg(rows: &[ReportRow], kind: PlotKind, meta: &PlotMeta) -> Result<String, HarnessError> {
    match kind {
        PlotKind::Sandwich => sandwich(rows, meta),
        PlotKind::Exponent => exponent(rows, meta),
        PlotKind::RegimeMap => regime_map(rows, meta),
    }
}

pub fn emit_svg(rows: &[ReportRow], kind: PlotKind, meta: &PlotMeta, path: &Path) -> Result<(), HarnessError> {
    let svg = render_svg(rows, kind, meta)?;
    std::fs::write(path, svg).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
