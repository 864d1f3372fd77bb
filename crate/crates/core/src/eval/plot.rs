//! CSV and SVG renderings of a sweep. Output is byte-deterministic for a
//! given input.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::ols::RegressionFit;
use super::sweep::SweepResult;

pub const CSV_HEADER: &str = "x,accuracy,n,ci_low,ci_high";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Csv,
    Svg,
}

impl FromStr for PlotFormat {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, PlotError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            _ => Err(PlotError::UnknownFormat(s.to_owned())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("unknown plot format {0:?} (expected csv or svg)")]
    UnknownFormat(String),
    #[error("sweep has no points")]
    Empty,
}

/// Renders `sweep` (accuracy in percent) with an optional fitted line and
/// confidence band.
pub fn emit_plot(
    sweep: &SweepResult,
    fit: Option<&RegressionFit>,
    format: PlotFormat,
) -> Result<String, PlotError> {
    if sweep.points.is_empty() {
        return Err(PlotError::Empty);
    }
    Ok(match format {
        PlotFormat::Csv => csv(sweep, fit),
        PlotFormat::Svg => svg(sweep, fit),
    })
}

fn csv(sweep: &SweepResult, fit: Option<&RegressionFit>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in &sweep.points {
        let (lo, hi) = match fit {
            Some(f) => {
                let (lo, hi) = f.band(p.x as f64);
                (format!("{lo:.4}"), format!("{hi:.4}"))
            }
            None => (String::new(), String::new()),
        };
        let _ = writeln!(out, "{},{:.4},{},{},{}", p.x, p.accuracy * 100.0, p.n, lo, hi);
    }
    out
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const BAND_STEPS: usize = 32;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let y = y.clamp(self.y0, self.y1);
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg(sweep: &SweepResult, fit: Option<&RegressionFit>) -> String {
    let xs: Vec<f64> = sweep.points.iter().map(|p| p.x as f64).collect();
    let (mut x0, mut x1) = (xs[0], xs[xs.len() - 1]);
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let f = Frame { x0, x1, y0: 0.0, y1: 100.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(&sweep.dataset)
    );

    // axes
    let (bx, by) = (LEFT, H - BOTTOM);
    let _ = writeln!(s, r#"<line x1="{bx:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}" stroke="black"/>"#, W - RIGHT);
    let _ = writeln!(s, r#"<line x1="{bx:.2}" y1="{by:.2}" x2="{bx:.2}" y2="{TOP:.2}" stroke="black"/>"#);
    for y in (0..=100).step_by(20) {
        let py = f.py(y as f64);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y}</text>"#,
            LEFT - 6.0,
            py + 4.0
        );
    }
    for p in &sweep.points {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(p.x as f64),
            H - BOTTOM + 18.0,
            p.x
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 12.0,
        sweep.axis.label()
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Accuracy (%)</text>"#,
        H / 2.0,
        H / 2.0
    );

    if let Some(fit) = fit {
        let step = (x1 - x0) / BAND_STEPS as f64;
        let grid: Vec<f64> = (0..=BAND_STEPS).map(|i| x0 + step * i as f64).collect();
        let mut poly = Vec::with_capacity(grid.len() * 2);
        for &x in &grid {
            poly.push(format!("{:.2},{:.2}", f.px(x), f.py(fit.band(x).1)));
        }
        for &x in grid.iter().rev() {
            poly.push(format!("{:.2},{:.2}", f.px(x), f.py(fit.band(x).0)));
        }
        let _ = writeln!(
            s,
            r#"<polygon class="ci-band" points="{}" fill="steelblue" fill-opacity="0.2" stroke="none"/>"#,
            poly.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<path class="fit" d="M{:.2},{:.2} L{:.2},{:.2}" fill="none" stroke="steelblue" stroke-width="1.5" stroke-dasharray="2 4"/>"#,
            f.px(x0),
            f.py(fit.predict(x0)),
            f.px(x1),
            f.py(fit.predict(x1))
        );
    }

    for p in &sweep.points {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"><title>{}: {:.2}% (n={})</title></circle>"#,
            f.px(p.x as f64),
            f.py(p.accuracy * 100.0),
            p.x,
            p.accuracy * 100.0,
            p.n
        );
    }
    s.push_str("</svg>\n");
    s
}
