//! Minimal SVG line and scatter charts for the report.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Lines,
    Points,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub style: Style,
    pub diagonal: bool,
    pub series: Vec<Series>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn render(&self) -> String {
        let ty = |y: f64| if self.log_y { y.max(f64::MIN_POSITIVE).log10() } else { y };
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = bounds(pts().map(|p| p.0));
        let (mut y0, mut y1) = bounds(pts().filter(|p| !self.log_y || p.1 > 0.0).map(|p| ty(p.1)));
        if self.diagonal {
            let (a, b) = (x0.min(y0), x1.max(y1));
            (y0, y1) = (a, b);
        }
        let (x0, x1) = if self.diagonal { (y0, y1) } else { (x0, x1) };
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (ty(y) - y0) / (y1 - y0) * (H - 2.0 * PAD);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let ylab = if self.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
            let (px, py) = (PAD + f * (W - 2.0 * PAD), H - PAD - f * (H - 2.0 * PAD));
            let _ = writeln!(s, r#"<text x="{px}" y="{}" text-anchor="middle">{xv:.4}</text>"#, H - PAD + 16.0);
            let _ = writeln!(s, r#"<text x="{}" y="{py}" text-anchor="end">{ylab}</text>"#, PAD - 4.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        );
        if self.diagonal {
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4"/>"#,
                sx(x0),
                H - PAD,
                sx(x1),
                PAD
            );
        }
        for (i, series) in self.series.iter().enumerate() {
            let colour = COLOURS[i % COLOURS.len()];
            let visible = series.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite() && (!self.log_y || p.1 > 0.0));
            match self.style {
                Style::Lines => {
                    let path: Vec<String> = visible.map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
                }
                Style::Points => {
                    for &(x, y) in visible {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#, sx(x), sy(y));
                    }
                }
            }
            let ly = PAD + 16.0 + 16.0 * i as f64;
            let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{colour}"/>"#, W - PAD - 150.0, ly - 9.0);
            let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, W - PAD - 135.0, escape(&series.name));
        }
        s.push_str("</svg>\n");
        s
    }
}
