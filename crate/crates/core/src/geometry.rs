//! Planar geometry primitives shared by the mesh, smoothing, FE and contact code.

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Outward normal of a directed edge whose solid lies on its left.
#[inline]
pub fn right_normal(a: &Vec2, b: &Vec2) -> Vec2 {
    let e = b - a;
    Vec2::new(e.y, -e.x) / e.norm()
}

/// Signed area, positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| cross(&poly[i], &poly[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(poly: &[Vec2]) -> Vec2 {
    let n = poly.len();
    let area = signed_area(poly);
    if area.abs() < f64::EPSILON {
        return poly.iter().sum::<Vec2>() / n as f64;
    }
    let mut c = Vec2::zeros();
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        c += (p + q) * cross(p, q);
    }
    c / (6.0 * area)
}

pub fn perimeter(poly: &[Vec2], closed: bool) -> f64 {
    let n = poly.len();
    let m = if closed { n } else { n.saturating_sub(1) };
    (0..m).map(|i| (poly[(i + 1) % n] - poly[i]).norm()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

/// Classify `p` against a simple polygon; points within `tol` of an edge are `Boundary`.
pub fn point_in_polygon(p: &Vec2, poly: &[Vec2], tol: f64) -> Containment {
    let n = poly.len();
    for i in 0..n {
        let (q, _) = closest_point_on_segment(p, &poly[i], &poly[(i + 1) % n]);
        if (q - p).norm() <= tol {
            return Containment::Boundary;
        }
    }
    // crossing number
    let mut inside = false;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    if inside {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

/// Closest point on segment `ab` to `p` and its parameter `t ∈ [0, 1]`.
pub fn closest_point_on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> (Vec2, f64) {
    let e = b - a;
    let len2 = e.norm_squared();
    if len2 == 0.0 {
        return (*a, 0.0);
    }
    let t = ((p - a).dot(&e) / len2).clamp(0.0, 1.0);
    (a + e * t, t)
}

pub fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (closest_point_on_segment(p, a, b).0 - p).norm()
}

fn orient(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    cross(&(b - a), &(c - a))
}

fn on_segment(a: &Vec2, b: &Vec2, p: &Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// True when closed segments `ab` and `cd` share at least one point.
pub fn segments_intersect(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Minimal distance between closed segments `ab` and `cd`.
pub fn segment_distance(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Simple-polygon test by pairwise intersection of non-adjacent edges.
pub fn is_simple_polygon(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_intersect(a, b, &poly[j], &poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Ear-clipping triangulation of a simple polygon in counter-clockwise order.
pub fn triangulate_ear_clip(poly: &[Vec2]) -> Option<Vec<[usize; 3]>> {
    let n = poly.len();
    if n < 3 {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let mut guard = 0usize;
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let i0 = idx[(k + m - 1) % m];
            let i1 = idx[k];
            let i2 = idx[(k + 1) % m];
            let (a, b, c) = (&poly[i0], &poly[i1], &poly[i2]);
            if orient(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == i0 || j == i1 || j == i2 {
                    return false;
                }
                let p = &poly[j];
                orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
            });
            if blocked {
                continue;
            }
            tris.push([i0, i1, i2]);
            idx.remove(k);
            clipped = true;
            break;
        }
        guard += 1;
        if !clipped || guard > 4 * n {
            return None;
        }
    }
    let (a, b, c) = (&poly[idx[0]], &poly[idx[1]], &poly[idx[2]]);
    if orient(a, b, c) <= 0.0 {
        return None;
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Some(tris)
}
