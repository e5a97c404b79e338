//! Deterministic SVG pictures of a history: the x-t plane in 1D, single
//! time slices in 2D. Phases are shaded, interface facets are stroked by
//! class and the two threshold level sets are drawn dashed.

use std::fmt::Write as _;

use super::IoError;
use crate::discretization::SpaceTimeField;
use crate::free_boundary::{FacetClass, FreeBoundaryDecomposition, Orientation};
use crate::relay::RelayParams;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN: f64 = 48.0;
const PLUS_FILL: &str = "#f4a582";
const MINUS_FILL: &str = "#92c5de";
const ALPHA_LEVEL: &str = "#053061";
const BETA_LEVEL: &str = "#67001f";

fn stroke(class: FacetClass) -> &'static str {
    match class {
        FacetClass::GammaAlpha => "#2166ac",
        FacetClass::GammaBeta => "#b2182b",
        FacetClass::GammaV => "#1b7837",
        FacetClass::Unclassified => "#000000",
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        HEIGHT - MARGIN - (y - self.y0) / span * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN * 0.6,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333" stroke-width="1"/>"##,
        MARGIN,
        MARGIN,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let fs = r#"font-family="sans-serif" font-size="11""#;
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" {fs}>{:.3}</text>"#, MARGIN, HEIGHT - MARGIN + 14.0, f.x0);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" {fs} text-anchor="end">{:.3}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0,
        f.x1
    );
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" {fs} text-anchor="middle">{xlabel}</text>"#, WIDTH / 2.0, HEIGHT - MARGIN + 28.0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" {fs} text-anchor="end">{:.3}</text>"#, MARGIN - 4.0, HEIGHT - MARGIN, f.y0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" {fs} text-anchor="end">{:.3}</text>"#, MARGIN - 4.0, MARGIN + 10.0, f.y1);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" {fs} text-anchor="middle">{ylabel}</text>"#, MARGIN - 30.0, HEIGHT / 2.0);
}

/// Cell edges halfway between neighbouring coordinates, clamped to the ends.
fn edges(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut e = Vec::with_capacity(n + 1);
    e.push(c[0]);
    for i in 1..n {
        e.push(0.5 * (c[i - 1] + c[i]));
    }
    e.push(c[n - 1]);
    e
}

/// Marching squares on a rectangular lattice, values `f(i, j)` at
/// `(xs[i], ys[j])`, level `theta`. Segments in data coordinates.
fn contour(xs: &[f64], ys: &[f64], f: impl Fn(usize, usize) -> f64, theta: f64) -> Vec<[f64; 4]> {
    let mut segs = Vec::new();
    if !theta.is_finite() {
        return segs;
    }
    for j in 0..ys.len().saturating_sub(1) {
        for i in 0..xs.len().saturating_sub(1) {
            let corners = [
                (xs[i], ys[j], f(i, j) - theta),
                (xs[i + 1], ys[j], f(i + 1, j) - theta),
                (xs[i + 1], ys[j + 1], f(i + 1, j + 1) - theta),
                (xs[i], ys[j + 1], f(i, j + 1) - theta),
            ];
            let mut pts = Vec::with_capacity(4);
            for e in 0..4 {
                let (xa, ya, a) = corners[e];
                let (xb, yb, b) = corners[(e + 1) % 4];
                if (a < 0.0) != (b < 0.0) {
                    let s = a / (a - b);
                    pts.push((xa + s * (xb - xa), ya + s * (yb - ya)));
                }
            }
            if pts.len() == 2 {
                segs.push([pts[0].0, pts[0].1, pts[1].0, pts[1].1]);
            } else if pts.len() == 4 {
                segs.push([pts[0].0, pts[0].1, pts[1].0, pts[1].1]);
                segs.push([pts[2].0, pts[2].1, pts[3].0, pts[3].1]);
            }
        }
    }
    segs
}

fn draw_segments(out: &mut String, f: &Frame, segs: &[[f64; 4]], color: &str) {
    if segs.is_empty() {
        return;
    }
    let _ = write!(out, r#"<path fill="none" stroke="{color}" stroke-width="1" stroke-dasharray="4 3" d=""#);
    for s in segs {
        let _ = write!(out, "M{:.2} {:.2}L{:.2} {:.2}", f.px(s[0]), f.py(s[1]), f.px(s[2]), f.py(s[3]));
    }
    let _ = writeln!(out, r#""/>"#);
}

fn legend(out: &mut String) {
    let items = [
        (PLUS_FILL, "h = +1"),
        (MINUS_FILL, "h = -1"),
        (stroke(FacetClass::GammaAlpha), "alpha facets"),
        (stroke(FacetClass::GammaBeta), "beta facets"),
        (stroke(FacetClass::GammaV), "vertical facets"),
    ];
    for (i, (c, label)) in items.iter().enumerate() {
        let x = MARGIN + 130.0 * i as f64;
        let y = HEIGHT - 12.0;
        let _ = writeln!(out, r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{c}"/>"#, y - 9.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" font-family="sans-serif" font-size="11">{label}</text>"#,
            x + 14.0
        );
    }
}

/// The x-t plane of a 1D history.
pub fn spacetime_svg(
    u: &SpaceTimeField,
    h: &SpaceTimeField,
    decomp: &FreeBoundaryDecomposition,
    p: &RelayParams,
    title: &str,
) -> Result<String, IoError> {
    let grid = u.grid();
    if grid.dim() != 1 {
        return Err(IoError::DimensionUnsupported { dim: grid.dim() });
    }
    let mut out = String::new();
    header(&mut out, title);
    if u.is_empty() {
        out.push_str("</svg>\n");
        return Ok(out);
    }
    let xs: Vec<f64> = (0..grid.len()).map(|i| grid.coord(i)[0]).collect();
    let ts = u.times();
    let f = Frame {
        x0: xs[0],
        x1: xs[xs.len() - 1],
        y0: ts[0],
        y1: ts[ts.len() - 1],
    };
    let xe = edges(&xs);
    let te = if ts.len() > 1 { edges(ts) } else { vec![ts[0], ts[0]] };
    for i in 0..xs.len() {
        let mut k = 0;
        while k < ts.len() {
            let v = h.value(k, i);
            let mut j = k;
            while j + 1 < ts.len() && h.value(j + 1, i) == v {
                j += 1;
            }
            let (xa, xb) = (f.px(xe[i]), f.px(xe[i + 1]));
            let (ya, yb) = (f.py(te[j + 1]), f.py(te[k]));
            let fill = if v > 0.0 { PLUS_FILL } else { MINUS_FILL };
            let _ = writeln!(
                out,
                r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                xb - xa,
                (yb - ya).max(0.01)
            );
            k = j + 1;
        }
    }
    for class in FacetClass::ALL {
        let mut d = String::new();
        for (_, fc) in decomp.of_class(class) {
            let (i, j) = (fc.lower.point, fc.upper.point);
            match fc.orientation {
                Orientation::TimeLike => {
                    let y = f.py(te[fc.upper.snapshot]);
                    let _ = write!(d, "M{:.2} {y:.2}H{:.2}", f.px(xe[i]), f.px(xe[i + 1]));
                }
                Orientation::SpaceLike => {
                    let x = f.px(xe[j]);
                    let k = fc.lower.snapshot;
                    let _ = write!(d, "M{x:.2} {:.2}V{:.2}", f.py(te[k]), f.py(te[k + 1]));
                }
            }
        }
        if !d.is_empty() {
            let _ = writeln!(out, r#"<path fill="none" stroke="{}" stroke-width="1.5" d="{d}"/>"#, stroke(class));
        }
    }
    for (theta, color) in [(p.alpha(), ALPHA_LEVEL), (p.beta(), BETA_LEVEL)] {
        let segs = contour(&xs, ts, |i, k| u.value(k, i), theta);
        draw_segments(&mut out, &f, &segs, color);
    }
    axes(&mut out, &f, "x", "t");
    legend(&mut out);
    out.push_str("</svg>\n");
    Ok(out)
}

/// The x-y plane of snapshot `k` of a 2D history.
pub fn time_slice_svg(
    u: &SpaceTimeField,
    h: &SpaceTimeField,
    p: &RelayParams,
    k: usize,
    title: &str,
) -> Result<String, IoError> {
    let grid = u.grid();
    if grid.dim() != 2 {
        return Err(IoError::DimensionUnsupported { dim: grid.dim() });
    }
    if k >= u.len() {
        return Err(IoError::SnapshotOutOfRange { index: k, len: u.len() });
    }
    let (ax, ay) = (grid.axis(0), grid.axis(1));
    let xs: Vec<f64> = (0..ax.count).map(|i| ax.coord(i)).collect();
    let ys: Vec<f64> = (0..ay.count).map(|j| ay.coord(j)).collect();
    let f = Frame {
        x0: ax.lo,
        x1: ax.hi,
        y0: ay.lo,
        y1: ay.hi,
    };
    let mut out = String::new();
    header(&mut out, &format!("{title} (t = {:.6})", u.times()[k]));
    let (xe, ye) = (edges(&xs), edges(&ys));
    let row = h.row(k);
    for j in 0..ys.len() {
        let mut i = 0;
        while i < xs.len() {
            let v = row[grid.flat_index([i, j])];
            let mut e = i;
            while e + 1 < xs.len() && row[grid.flat_index([e + 1, j])] == v {
                e += 1;
            }
            let (xa, xb) = (f.px(xe[i]), f.px(xe[e + 1]));
            let (ya, yb) = (f.py(ye[j + 1]), f.py(ye[j]));
            let fill = if v > 0.0 { PLUS_FILL } else { MINUS_FILL };
            let _ = writeln!(
                out,
                r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                xb - xa,
                yb - ya
            );
            i = e + 1;
        }
    }
    let urow = u.row(k);
    for (theta, color) in [(p.alpha(), ALPHA_LEVEL), (p.beta(), BETA_LEVEL)] {
        let segs = contour(&xs, &ys, |i, j| urow[grid.flat_index([i, j])], theta);
        draw_segments(&mut out, &f, &segs, color);
    }
    axes(&mut out, &f, "x", "y");
    legend(&mut out);
    out.push_str("</svg>\n");
    Ok(out)
}
