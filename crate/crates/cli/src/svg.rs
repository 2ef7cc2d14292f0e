//! Minimal scatter-plot SVG writer.

use std::fmt::Write;

pub const SIZE: f64 = 800.0;
const MARGIN: f64 = 60.0;
const RADIUS: f64 = 2.5;

/// One colored point cloud.
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a [[f64; 2]],
}

/// Axis-aligned data bounds `[xmin, xmax, ymin, ymax]` over every series.
/// Degenerate extents are widened so the scale stays finite.
pub fn bounds(series: &[Series<'_>]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in series.iter().flat_map(|s| s.points) {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].max(p[0]);
        b[2] = b[2].min(p[1]);
        b[3] = b[3].max(p[1]);
    }
    if !b[0].is_finite() {
        return [-1.0, 1.0, -1.0, 1.0];
    }
    for axis in [0, 2] {
        if b[axis + 1] - b[axis] < 1e-12 {
            b[axis] -= 0.5;
            b[axis + 1] += 0.5;
        }
    }
    b
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `series` inside the fixed 800×800 view box. `bounds` is explicit
/// so that several plots can share one scale.
pub fn scatter(title: &str, series: &[Series<'_>], bounds: [f64; 4]) -> String {
    let span = SIZE - 2.0 * MARGIN;
    let sx = span / (bounds[1] - bounds[0]);
    let sy = span / (bounds[3] - bounds[2]);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" width="{SIZE}" height="{SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="#999"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="36" font-family="sans-serif" font-size="18">{}</text>"#,
        escape(title)
    );
    for s in series {
        let _ = writeln!(out, r#"<g fill="{}" fill-opacity="0.6">"#, s.color);
        for p in s.points {
            let x = MARGIN + (p[0] - bounds[0]) * sx;
            let y = SIZE - MARGIN - (p[1] - bounds[2]) * sy;
            let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{RADIUS}"/>"#);
        }
        out.push_str("</g>\n");
    }
    out.push_str("<g id=\"legend\" font-family=\"sans-serif\" font-size=\"14\">\n");
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN + 20.0 + 22.0 * i as f64;
        let x = SIZE - MARGIN - 150.0;
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/>"#, y - 11.0, s.color);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, x + 20.0, escape(s.label));
    }
    out.push_str("</g>\n</svg>\n");
    out
}
