//! Minimal SVG plots: scatter and line series on linear or log-log axes.

use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Points,
    Line,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub style: Style,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_axes: bool,
    pub width: f64,
    pub height: f64,
    pub series: Vec<Series>,
}

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_axes: false,
            width: 640.0,
            height: 480.0,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_axes = true;
        self
    }

    pub fn add(&mut self, label: impl Into<String>, style: Style, xs: Vec<f64>, ys: Vec<f64>) -> &mut Self {
        let color = PALETTE[self.series.len() % PALETTE.len()].to_string();
        self.series.push(Series { label: label.into(), color, style, xs, ys });
        self
    }

    fn tx(&self, v: f64) -> f64 {
        if self.log_axes {
            v.log10()
        } else {
            v
        }
    }

    /// Data range in transformed coordinates, padded so a flat series still plots.
    fn range(&self, pick: impl Fn(&Series) -> &Vec<f64>) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.series {
            for &v in pick(s) {
                let t = self.tx(v);
                if t.is_finite() {
                    lo = lo.min(t);
                    hi = hi.max(t);
                }
            }
        }
        if !lo.is_finite() {
            return (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            return (lo - 0.5, hi + 0.5);
        }
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    }

    pub fn render(&self) -> String {
        let (x0, x1) = self.range(|s| &s.xs);
        let (y0, y1) = self.range(|s| &s.ys);
        let pw = self.width - MARGIN_L - MARGIN_R;
        let ph = self.height - MARGIN_T - MARGIN_B;
        let px = |t: f64| MARGIN_L + (t - x0) / (x1 - x0) * pw;
        let py = |t: f64| MARGIN_T + ph - (t - y0) / (y1 - y0) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            MARGIN_L + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
        );
        for t in ticks(x0, x1, self.log_axes) {
            let x = px(t);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                MARGIN_T + ph,
                MARGIN_T + ph + 5.0,
                MARGIN_T + ph + 18.0,
                tick_label(t, self.log_axes)
            );
        }
        for t in ticks(y0, y1, self.log_axes) {
            let y = py(t);
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{MARGIN_L}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN_L - 5.0,
                MARGIN_L - 8.0,
                y + 4.0,
                tick_label(t, self.log_axes)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            self.height - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );

        for (si, s) in self.series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = s
                .xs
                .iter()
                .zip(&s.ys)
                .map(|(&x, &y)| (self.tx(x), self.tx(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| (px(x), py(y)))
                .collect();
            match s.style {
                Style::Points => {
                    let _ = write!(out, r#"<g fill="{}" fill-opacity="0.7">"#, s.color);
                    for (x, y) in &pts {
                        let _ = write!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="1.6"/>"#);
                    }
                    let _ = writeln!(out, "</g>");
                }
                Style::Line => {
                    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                    let _ = writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                        s.color,
                        path.join(" ")
                    );
                    for (x, y) in &pts {
                        let _ = write!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{}"/>"#, s.color);
                    }
                    let _ = writeln!(out);
                }
            }
            let ly = MARGIN_T + 12.0 + 18.0 * si as f64;
            let lx = self.width - MARGIN_R + 10.0;
            let _ = writeln!(
                out,
                r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
                ly - 9.0,
                s.color,
                lx + 15.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions in transformed coordinates: whole decades on log axes,
/// 1-2-5 steps on linear ones.
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    let step = if log {
        ((hi - lo) / 6.0).ceil().max(1.0)
    } else {
        let raw = (hi - lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let r = raw / mag;
        mag * if r < 1.5 {
            1.0
        } else if r < 3.5 {
            2.0
        } else if r < 7.5 {
            5.0
        } else {
            10.0
        }
    };
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-9 * step { 0.0 } else { t });
        t += step;
    }
    if log && out.is_empty() {
        // range inside a single decade: label the endpoints instead
        out = vec![lo, hi];
    }
    out
}

fn tick_label(t: f64, log: bool) -> String {
    if log {
        if (t - t.round()).abs() < 1e-9 {
            format!("1e{}", t.round() as i64)
        } else {
            format!("{:.3}", 10f64.powf(t))
        }
    } else {
        format!("{}", (t * 1e6).round() / 1e6)
    }
}
