//! Report assembly: JSON summaries, CSV tables and SVG line charts.
//! Everything here is a pure function of its input, so reruns with the
//! same config and seed give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub worst_case: Value,
    pub constants: BTreeMap<String, f64>,
}

impl SuiteReport {
    pub fn new(suite: &str, pass: bool) -> Self {
        Self {
            suite: suite.into(),
            pass,
            worst_case: Value::Null,
            constants: BTreeMap::new(),
        }
    }

    pub fn constant(mut self, key: &str, v: f64) -> Self {
        self.constants.insert(key.into(), v);
        self
    }

    pub fn worst(mut self, v: impl Serialize) -> Self {
        self.worst_case = serde_json::to_value(v).unwrap_or(Value::Null);
        self
    }
}

pub fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line chart on optionally logarithmic axes.
pub fn svg_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool, log_y: bool) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (tx(x), ty(y))))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let bound = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&(f64, f64)) -> f64| pts.iter().map(sel).fold(init, f);
    let (mut x0, mut x1) = (bound(f64::min, f64::INFINITY, |p| p.0), bound(f64::max, f64::NEG_INFINITY, |p| p.0));
    let (mut y0, mut y1) = (bound(f64::min, f64::INFINITY, |p| p.1), bound(f64::max, f64::NEG_INFINITY, |p| p.1));
    if !(x0 < x1) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y0 < y1) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} L{m} {b} L{r} {b}" fill="none" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    let fmt_tick = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            px(xv),
            h - m + 16.0,
            fmt_tick(xv, log_x)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#,
            m - 6.0,
            py(yv) + 4.0,
            fmt_tick(yv, log_y)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, h - 14.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| (tx(x), ty(y)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .enumerate()
            .map(|(j, (x, y))| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, px(x), py(y)))
            .collect();
        if !d.is_empty() {
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.join(" "));
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            w - m - 120.0,
            m + 16.0 * i as f64,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
