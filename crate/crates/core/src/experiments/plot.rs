use std::fmt::Write as _;

use crate::agents::{TrainingLog, LOG_HEADER};

const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 160.0;
const COLS: usize = 3;
const PAD: f64 = 36.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One line chart per log column against `step`, as standalone SVG 1.1.
/// Columns with no finite value are skipped.
pub fn plot_svg(log: &TrainingLog, title: &str) -> String {
    let names: Vec<&str> = LOG_HEADER.split(',').skip(1).collect();
    let panels: Vec<(usize, &str)> = names
        .iter()
        .enumerate()
        .filter(|(i, _)| log.rows.iter().any(|r| r.values()[*i].is_finite()))
        .map(|(i, n)| (i, *n))
        .collect();
    let rows = panels.len().div_ceil(COLS).max(1);
    let width = COLS as f64 * (PANEL_W + PAD) + PAD;
    let height = rows as f64 * (PANEL_H + PAD) + 2.0 * PAD;
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{PAD}" y="{}" font-size="14">{}</text>"#, PAD * 0.6, escape(title)).unwrap();
    let (s_min, s_max) = log.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.step as f64), hi.max(r.step as f64))
    });
    for (k, (col, name)) in panels.iter().enumerate() {
        let x0 = PAD + (k % COLS) as f64 * (PANEL_W + PAD);
        let y0 = 1.5 * PAD + (k / COLS) as f64 * (PANEL_H + PAD);
        let pts: Vec<(f64, f64)> =
            log.rows.iter().map(|r| (r.step as f64, r.values()[*col])).filter(|(_, v)| v.is_finite()).collect();
        let (mut lo, mut hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let sx = |s: f64| if s_max > s_min { x0 + (s - s_min) / (s_max - s_min) * PANEL_W } else { x0 + PANEL_W / 2.0 };
        let sy = |v: f64| y0 + PANEL_H - (v - lo) / (hi - lo) * PANEL_H;
        writeln!(out, r##"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#888"/>"##).unwrap();
        writeln!(out, r#"<text x="{x0}" y="{}">{}</text>"#, y0 - 4.0, escape(name)).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{hi:.3}</text>"#, x0 - 2.0, y0 + 10.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{lo:.3}</text>"#, x0 - 2.0, y0 + PANEL_H).unwrap();
        let mut poly = String::new();
        for (s, v) in &pts {
            write!(poly, "{:.2},{:.2} ", sx(*s), sy(*v)).unwrap();
        }
        writeln!(out, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##, poly.trim_end()).unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    out
}
