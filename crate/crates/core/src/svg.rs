//! SVG snapshots of a design and its deformed configuration.

use std::fmt::Write as _;

use crate::config::{Axis, SymmetryConfig};
use crate::geometry::Vec2;
use crate::pipeline::{Analysis, Problem};

const MARGIN: f64 = 0.08;
const PX_PER_MM: f64 = 10.0;

struct Frame {
    lo: Vec2,
    hi: Vec2,
    mirror: Option<SymmetryConfig>,
}

impl Frame {
    fn map(&self, p: &Vec2) -> (f64, f64) {
        ((p.x - self.lo.x) * PX_PER_MM, (self.hi.y - p.y) * PX_PER_MM)
    }

    fn images(&self, p: &Vec2) -> Vec<Vec2> {
        match self.mirror {
            None => vec![*p],
            Some(s) => {
                let q = match s.axis {
                    Axis::X => Vec2::new(2.0 * s.at - p.x, p.y),
                    Axis::Y => Vec2::new(p.x, 2.0 * s.at - p.y),
                };
                vec![*p, q]
            }
        }
    }

    fn include(&mut self, p: &Vec2) {
        for q in self.images(p) {
            self.lo = self.lo.inf(&q);
            self.hi = self.hi.sup(&q);
        }
    }

    fn polyline(&self, out: &mut String, pts: &[Vec2], closed: bool, style: &str) {
        let copies = if self.mirror.is_some() { 2 } else { 1 };
        for copy in 0..copies {
            let mut d = String::new();
            for (i, p) in pts.iter().enumerate() {
                let (x, y) = self.map(&self.images(p)[copy]);
                let _ = write!(d, "{}{x:.3},{y:.3} ", if i == 0 { "M" } else { "L" });
            }
            if closed {
                d.push('Z');
            }
            let _ = writeln!(out, r#"<path d="{}" {style}/>"#, d.trim_end());
        }
    }

    fn circle(&self, out: &mut String, c: &Vec2, r: f64, style: &str) {
        for q in self.images(c) {
            let (x, y) = self.map(&q);
            let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" {style}/>"#, r * PX_PER_MM);
        }
    }
}

/// Reference design (grey), deformed body (blue), masks (red outlines),
/// rigid surfaces, desired (black) and actual (green) curves and active
/// contact sites. With `mirror` set, every item is also drawn reflected.
pub fn render(problem: &Problem, analysis: &Analysis, mirror: Option<SymmetryConfig>, title: &str) -> String {
    let mesh = &problem.mesh;
    let base = mesh.positions();
    let reference = analysis.reference.clone().unwrap_or_else(|| base.clone());
    let deformed = analysis.deformed();
    let (lo, hi) = mesh.bounding_box();
    let mut frame = Frame { lo, hi, mirror };
    frame.include(&lo);
    frame.include(&hi);
    if let Some(x) = &deformed {
        x.iter().for_each(|p| frame.include(p));
    }
    problem.target.iter().for_each(|p| frame.include(p));
    let pad = MARGIN * (frame.hi - frame.lo).norm();
    frame.lo -= Vec2::new(pad, pad);
    frame.hi += Vec2::new(pad, pad);
    let w = (frame.hi.x - frame.lo.x) * PX_PER_MM;
    let h = (frame.hi.y - frame.lo.y) * PX_PER_MM;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let _ = writeln!(s, "<title>{title}</title>");
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let solid: Vec<usize> = analysis.material.solid_elements().collect();
    for &e in &solid {
        let poly: Vec<Vec2> = mesh.elements[e].node_ids.iter().map(|&n| reference[n]).collect();
        frame.polyline(&mut s, &poly, true, r##"fill="#c8c8c8" stroke="#8c8c8c" stroke-width="0.5""##);
    }
    if let Some(x) = &deformed {
        for &e in &solid {
            let poly: Vec<Vec2> = mesh.elements[e].node_ids.iter().map(|&n| x[n]).collect();
            frame.polyline(&mut s, &poly, true, r##"fill="#3a6fd8" fill-opacity="0.55" stroke="#1d3f8c" stroke-width="0.5""##);
        }
    }
    for m in &analysis.candidate.design.masks {
        frame.circle(&mut s, &m.center(), m.r, r##"fill="none" stroke="#d62728" stroke-width="0.8" stroke-dasharray="4 3""##);
    }
    for r in &analysis.surfaces {
        frame.polyline(&mut s, &r.points, true, r##"fill="#7f7f7f" stroke="#333333" stroke-width="0.8""##);
    }
    frame.polyline(&mut s, &problem.target, false, r##"fill="none" stroke="#000000" stroke-width="1.5""##);
    if let Some(c) = &analysis.actual_curve {
        frame.polyline(&mut s, c, false, r##"fill="none" stroke="#2ca02c" stroke-width="1.5""##);
    }
    let marker = 0.6 * mesh.edge_length;
    for site in &analysis.sites {
        frame.circle(&mut s, &site.position, marker, r##"fill="none" stroke="#d62728" stroke-width="1" stroke-dasharray="6 2 1 2""##);
    }
    s.push_str("</svg>\n");
    s
}
