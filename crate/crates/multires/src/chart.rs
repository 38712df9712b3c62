//! Minimal deterministic SVG line charts.
//!
//! One polyline per series over a shared linear x axis; the y axis is
//! linear or log10. Output is plain text assembled in series order
//! with fixed two-decimal coordinates, so identical input yields
//! identical bytes. No external assets, no timestamps, no randomness.

use std::path::Path;

use crate::error::{Error, Result};

/// One named line.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Chart appearance and scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Log10 y axis; points with y <= 0 are dropped and polylines
    /// break at the gaps.
    pub log_y: bool,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions {
            title: String::new(),
            x_label: "r".into(),
            y_label: "error".into(),
            log_y: false,
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
/// Fixed series palette; cycles when there are more series.
const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Renders the chart to an SVG string.
pub fn render_svg(series: &[Series], opts: &ChartOptions) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Config("svg chart needs at least one series with points".into()));
    }
    // Transformed points per series, split into segments at gaps.
    let mut segments: Vec<(usize, Vec<Vec<(f64, f64)>>)> = Vec::new();
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (si, s) in series.iter().enumerate() {
        let mut segs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for &(x, y) in &s.points {
            let ty = if opts.log_y {
                if y <= 0.0 {
                    if !segs.last().unwrap().is_empty() {
                        segs.push(Vec::new());
                    }
                    continue;
                }
                y.log10()
            } else {
                y
            };
            if !(x.is_finite() && ty.is_finite()) {
                return Err(Error::Config(format!(
                    "svg chart point ({x}, {y}) in series {:?} is not finite",
                    s.label
                )));
            }
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(ty);
            y_max = y_max.max(ty);
            segs.last_mut().unwrap().push((x, ty));
        }
        segments.push((si, segs));
    }
    if !x_min.is_finite() {
        return Err(Error::Config(
            "svg chart has no drawable points (log scale drops y <= 0)".into(),
        ));
    }
    // Degenerate spans still need a nonzero scale.
    if x_max == x_min {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max == y_min {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + (y_max - y) / (y_max - y_min) * plot_h;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    if !opts.title.is_empty() {
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
             text-anchor=\"middle\">{}</text>\n",
            MARGIN_L + plot_w / 2.0,
            esc(&opts.title)
        ));
    }
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    ));
    out.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_L, MARGIN_T, MARGIN_L, MARGIN_T + plot_h
    ));
    // Ticks and labels, five per axis.
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = sx(fx);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            MARGIN_T + plot_h + 18.0,
            esc(&format!("{fx:.4}"))
        ));
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let py = sy(fy);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0,
            MARGIN_L
        ));
        let label = if opts.log_y {
            format!("{:.3e}", 10f64.powf(fy))
        } else {
            format!("{fy:.4}")
        };
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 8.0,
            py + 4.0,
            esc(&label)
        ));
    }
    // Axis titles.
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0,
        esc(&opts.x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        esc(&opts.y_label)
    ));
    // Series polylines.
    for (si, segs) in &segments {
        let color = PALETTE[si % PALETTE.len()];
        for seg in segs {
            if seg.len() == 1 {
                let (x, y) = seg[0];
                out.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                    sx(x),
                    sy(y)
                ));
                continue;
            }
            if seg.is_empty() {
                continue;
            }
            let coords: Vec<String> =
                seg.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            out.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                coords.join(" ")
            ));
        }
    }
    // Legend, one row per series.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let y = MARGIN_T + 14.0 + 18.0 * si as f64;
        let x = WIDTH - MARGIN_R + 12.0;
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            y - 4.0,
            x + 22.0,
            y - 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            x + 28.0,
            esc(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders and writes the chart.
pub fn write_svg(path: &Path, series: &[Series], opts: &ChartOptions) -> Result<()> {
    let svg = render_svg(series, opts)?;
    std::fs::write(path, svg)?;
    Ok(())
}
