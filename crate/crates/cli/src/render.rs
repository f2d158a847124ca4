//! Deterministic SVG figures.
//!
//! Colors: regular triangles are outlined in #6c757d with no fill; highlighted
//! triangles (crack crossings or detached rows) are filled #f4a261; bad
//! triangles (energy above s J∞) are filled #e76f51; triangles with det ≤ 0 are
//! filled #6a040f; crack segments are drawn in #1d3557. Each figure maps the
//! bounding box of its points to an 800 px wide viewport with a 20 px margin
//! and the y axis pointing up.

use std::fmt::Write;

use lattice_fracture::geom::{v, Vec2};
use lattice_fracture::lattice::LatticeDomain;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;

pub const EDGE: &str = "#6c757d";
pub const HIGHLIGHT: &str = "#f4a261";
pub const BAD: &str = "#e76f51";
pub const VIOLATING: &str = "#6a040f";
pub const CRACK: &str = "#1d3557";

pub struct Figure<'a> {
    pub domain: &'a LatticeDomain,
    pub highlight: &'a [usize],
    pub bad: &'a [usize],
    pub violating: &'a [usize],
    pub cracks: &'a [(Vec2, Vec2)],
}

struct View {
    lo: Vec2,
    scale: f64,
    height: f64,
}

impl View {
    fn fit(points: &[Vec2]) -> View {
        let (mut lo, mut hi) = (v(f64::INFINITY, f64::INFINITY), v(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points.iter().filter(|p| p.x.is_finite() && p.y.is_finite()) {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if !lo.x.is_finite() {
            lo = v(0.0, 0.0);
            hi = v(1.0, 1.0);
        }
        let span = (hi - lo).sup(&v(1e-9, 1e-9));
        let scale = (WIDTH - 2.0 * MARGIN) / span.x.max(span.y);
        View { lo, scale, height: span.y * scale + 2.0 * MARGIN }
    }

    fn map(&self, p: Vec2) -> (String, String) {
        let x = MARGIN + (p.x - self.lo.x) * self.scale;
        let y = self.height - MARGIN - (p.y - self.lo.y) * self.scale;
        (num(x), num(y))
    }
}

/// Two decimals, without a negative zero.
fn num(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    format!("{:.2}", if r == 0.0 { 0.0 } else { r })
}

fn path(view: &View, pos: &[Vec2], domain: &LatticeDomain, tris: impl Iterator<Item = usize>) -> String {
    let mut d = String::new();
    for t in tris {
        let [a, b, c] = domain.triangles[t];
        for (k, n) in [a, b, c].into_iter().enumerate() {
            let (x, y) = view.map(pos[n]);
            let _ = write!(d, "{}{x} {y} ", if k == 0 { "M" } else { "L" });
        }
        d.push_str("Z ");
    }
    d.trim_end().to_string()
}

fn svg(pos: &[Vec2], fig: &Figure, cracks: bool) -> String {
    let mut pts: Vec<Vec2> = pos.to_vec();
    if cracks {
        pts.extend(fig.domain.polygon.iter().copied());
    }
    let view = View::fit(&pts);
    let n = fig.domain.triangles.len();
    let mut class = vec![0u8; n];
    for &t in fig.highlight {
        class[t] = class[t].max(1);
    }
    for &t in fig.bad {
        class[t] = class[t].max(2);
    }
    for &t in fig.violating {
        class[t] = 3;
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(WIDTH),
        h = num(view.height)
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for (k, fill) in [(1u8, HIGHLIGHT), (2, BAD), (3, VIOLATING)] {
        let d = path(&view, pos, fig.domain, (0..n).filter(|&t| class[t] == k));
        if !d.is_empty() {
            let _ = writeln!(out, r#"<path d="{d}" fill="{fill}" stroke="none"/>"#);
        }
    }
    let d = path(&view, pos, fig.domain, 0..n);
    if !d.is_empty() {
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{EDGE}" stroke-width="0.5"/>"#);
    }
    if cracks {
        for &(a, b) in fig.cracks {
            let ((x1, y1), (x2, y2)) = (view.map(a), view.map(b));
            let _ =
                writeln!(out, r#"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{CRACK}" stroke-width="2"/>"#);
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Reference triangulation with crack overlay.
pub fn reference_svg(fig: &Figure) -> String {
    svg(&fig.domain.nodes, fig, true)
}

/// Deformed triangulation.
pub fn deformed_svg(fig: &Figure, u: &[Vec2]) -> String {
    svg(u, fig, false)
}
