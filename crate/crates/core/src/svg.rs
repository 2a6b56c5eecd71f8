//! Minimal self-contained SVG plots: stacked line charts and a heatmap.

use std::fmt::Write as _;

use crate::series::ScalarSeries;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 160.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#000000", "#d62728", "#1f77b4", "#2ca02c"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One panel per entry; each panel overlays its series on a shared time axis.
pub fn line_chart(title: &str, panels: &[(&str, Vec<&ScalarSeries>)]) -> String {
    let height = MARGIN * 2.0 + PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));

    let all: Vec<&ScalarSeries> = panels.iter().flat_map(|p| p.1.iter().copied()).collect();
    let t0 = all.iter().map(|s| s.start_time()).fold(f64::INFINITY, f64::min);
    let t1 = all
        .iter()
        .map(|s| s.start_time() + s.duration())
        .fold(f64::NEG_INFINITY, f64::max);
    let (t0, t1) = if t0.is_finite() && t1 > t0 { (t0, t1) } else { (0.0, 1.0) };
    let plot_w = WIDTH - 2.0 * MARGIN;

    for (k, (label, series)) in panels.iter().enumerate() {
        let top = MARGIN + k as f64 * PANEL_HEIGHT;
        let h = PANEL_HEIGHT - 30.0;
        let (mut lo, mut hi) = series
            .iter()
            .flat_map(|s| s.values().iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() || hi - lo < 1e-12 {
            lo = if lo.is_finite() { lo - 0.5 } else { 0.0 };
            hi = lo + 1.0;
        }
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{top}" width="{plot_w}" height="{h}" fill="none" stroke="#888"/>"##
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, MARGIN + 4.0, top + 12.0, escape(label));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{hi:.3}</text>"#, MARGIN - 4.0, top + 10.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{lo:.3}</text>"#, MARGIN - 4.0, top + h);
        for (j, s) in series.iter().enumerate() {
            let mut pts = String::new();
            for (i, v) in s.values().iter().enumerate() {
                let x = MARGIN + (s.time_at(i) - t0) / (t1 - t0) * plot_w;
                let y = top + h - (v - lo) / (hi - lo) * h;
                let _ = write!(pts, "{x:.2},{y:.2} ");
            }
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
                COLORS[j % COLORS.len()],
                pts.trim_end()
            );
        }
    }
    let axis_y = height - MARGIN + 15.0;
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{axis_y}">{t0:.1} s</text>"#);
    let _ = writeln!(out, r#"<text x="{}" y="{axis_y}" text-anchor="end">{t1:.1} s</text>"#, WIDTH - MARGIN);
    out.push_str("</svg>\n");
    out
}

fn heat_color(frac: f64) -> String {
    // White to dark red.
    let f = frac.clamp(0.0, 1.0);
    let g = (255.0 * (1.0 - f)).round() as u8;
    let r = (255.0 - 100.0 * f).round() as u8;
    format!("rgb({r},{g},{g})")
}

/// Heatmap with rows labelled by `row_values` and columns by `col_values`.
pub fn heatmap(title: &str, row_label: &str, col_label: &str, row_values: &[f64], col_values: &[f64], cells: &[Vec<f64>]) -> String {
    let cell_w = 60.0;
    let cell_h = 28.0;
    let left = 90.0;
    let top = 50.0;
    let width = left + cell_w * col_values.len() as f64 + 40.0;
    let height = top + cell_h * row_values.len() as f64 + 60.0;
    let (lo, hi) = cells
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="10" y="{}">{}</text>"#, top - 8.0, escape(row_label));
    for (i, rv) in row_values.iter().enumerate() {
        let y = top + i as f64 * cell_h;
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{rv}</text>"#, left - 6.0, y + cell_h / 2.0 + 4.0);
        for (j, _) in col_values.iter().enumerate() {
            let v = cells[i][j];
            let x = left + j as f64 * cell_w;
            let _ = writeln!(
                out,
                r#"<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{}" stroke="white"/>"#,
                heat_color((v - lo) / span)
            );
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{v:.3}</text>"#, x + cell_w / 2.0, y + cell_h / 2.0 + 4.0);
        }
    }
    let base = top + row_values.len() as f64 * cell_h;
    for (j, cv) in col_values.iter().enumerate() {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{cv}</text>"#, left + (j as f64 + 0.5) * cell_w, base + 16.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + cell_w * col_values.len() as f64 / 2.0,
        base + 36.0,
        escape(col_label)
    );
    out.push_str("</svg>\n");
    out
}
