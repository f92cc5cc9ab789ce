//! Minimal SVG 1.1 plots: polylines in data coordinates.

use std::fmt::Write as _;

pub struct Plot {
    lines: Vec<(Vec<[f64; 2]>, &'static str, f64)>,
    title: String,
}

impl Plot {
    pub fn new(title: impl Into<String>) -> Self {
        Plot { lines: Vec::new(), title: title.into() }
    }

    pub fn line(&mut self, pts: Vec<[f64; 2]>, colour: &'static str, width: f64) {
        if pts.len() > 1 {
            self.lines.push((pts, colour, width));
        }
    }

    pub fn render(&self, size: f64) -> String {
        let finite = self.lines.iter().flat_map(|l| l.0.iter()).filter(|p| p[0].is_finite() && p[1].is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in finite {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-12) * 1.05;
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let map = |p: &[f64; 2]| ((p[0] - cx) / span * size + 0.5 * size, (cy - p[1]) / span * size + 0.5 * size);
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(s, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
        for (pts, colour, width) in &self.lines {
            let mut d = String::new();
            for p in pts.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
                let (x, y) = map(p);
                let _ = write!(d, "{x:.3},{y:.3} ");
            }
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="{width}" points="{}"/>"#, d.trim_end());
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
