//! Fourier shape descriptors of closed polylines and the shape-matching
//! objective built on them.
//!
//! The cumulative turning function of a clockwise polygon is normalized to
//! `φ*(t) = φ(Lt/2π) + t` on `[0, 2π)` and expanded in harmonics. For a
//! polygon, the coefficients have the closed form
//! `a_k = −1/(kπ) Σ Δφ_j sin(k t_j)`, `b_k = 1/(kπ) Σ Δφ_j cos(k t_j)` with
//! turning angles `Δφ_j` at normalized arc positions `t_j`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{is_simple_polygon, perimeter, signed_area, Vec2};

/// Default number of harmonics.
pub const DEFAULT_HARMONICS: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("curve needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("consecutive points {0} and {1} coincide")]
    RepeatedPoint(usize, usize),
    #[error("closed curve has zero area")]
    Degenerate,
    #[error("closed curve intersects itself")]
    SelfIntersecting,
    #[error("descriptor sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("invariant undefined: reference magnitude is zero")]
    UndefinedInvariant,
    #[error("curve file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePolyline {
    pub points: Vec<Vec2>,
    pub closed: bool,
}

impl CurvePolyline {
    pub fn open(points: Vec<Vec2>) -> Self {
        CurvePolyline { points, closed: false }
    }

    pub fn closed(points: Vec<Vec2>) -> Self {
        CurvePolyline { points, closed: true }
    }
}

/// Close an open curve with the chord from its last point to its first and
/// orient it clockwise. Closed input is only re-oriented.
pub fn close_curve(c: &CurvePolyline) -> Result<CurvePolyline, ShapeError> {
    let n = c.points.len();
    if n < 3 {
        return Err(ShapeError::TooFewPoints(n));
    }
    for i in 0..n {
        let j = (i + 1) % n;
        if (j != 0 || c.closed) && c.points[i] == c.points[j] {
            return Err(ShapeError::RepeatedPoint(i, j));
        }
    }
    if c.points[n - 1] == c.points[0] {
        return Err(ShapeError::RepeatedPoint(n - 1, 0));
    }
    let area = signed_area(&c.points);
    let len = perimeter(&c.points, true);
    if area.abs() <= 1e-12 * len * len {
        return Err(ShapeError::Degenerate);
    }
    if !is_simple_polygon(&c.points) {
        return Err(ShapeError::SelfIntersecting);
    }
    let points = if area < 0.0 {
        c.points.clone()
    } else if c.closed {
        // keep the start point, walk the other way
        std::iter::once(c.points[0]).chain(c.points[1..].iter().rev().copied()).collect()
    } else {
        c.points.iter().rev().copied().collect()
    };
    Ok(CurvePolyline::closed(points))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierDescriptor {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub length: f64,
    pub theta: f64,
}

impl FourierDescriptor {
    pub fn harmonics(&self) -> usize {
        self.a.len()
    }

    /// Harmonic magnitudes `R_k = √(a_k² + b_k²)`.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a.hypot(*b)).collect()
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Descriptor of a closed clockwise curve as returned by [`close_curve`].
pub fn compute_fsd(c: &CurvePolyline, n: usize) -> Result<FourierDescriptor, ShapeError> {
    let closed = close_curve(c)?;
    let p = &closed.points;
    let m = p.len();
    let seg: Vec<Vec2> = (0..m).map(|i| p[(i + 1) % m] - p[i]).collect();
    let lens: Vec<f64> = seg.iter().map(|s| s.norm()).collect();
    let total: f64 = lens.iter().sum();
    let dir: Vec<f64> = seg.iter().map(|s| s.y.atan2(s.x)).collect();
    // turn at vertex j+1, between segment j and j+1; the turn at the start
    // vertex sits at arc length L
    let mut turns = Vec::with_capacity(m);
    let mut arc = 0.0;
    let mut sum = 0.0;
    for j in 0..m {
        arc += lens[j];
        let d = wrap_angle(dir[(j + 1) % m] - dir[j]);
        sum += d;
        turns.push((2.0 * PI * arc / total, d));
    }
    if (sum + 2.0 * PI).abs() > 1e-6 {
        return Err(ShapeError::SelfIntersecting);
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for k in 1..=n {
        let kf = k as f64;
        let (mut sa, mut sb) = (0.0, 0.0);
        for &(t, d) in &turns {
            let (s, co) = (kf * t).sin_cos();
            sa += d * s;
            sb += d * co;
        }
        a.push(-sa / (kf * PI));
        b.push(sb / (kf * PI));
    }
    Ok(FourierDescriptor {
        a,
        b,
        length: total,
        theta: dir[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsdErrors {
    pub a: f64,
    pub b: f64,
    pub length: f64,
    pub theta: f64,
}

pub fn fsd_errors(d: &FourierDescriptor, a: &FourierDescriptor) -> Result<FsdErrors, ShapeError> {
    if d.harmonics() != a.harmonics() {
        return Err(ShapeError::SizeMismatch(d.harmonics(), a.harmonics()));
    }
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    Ok(FsdErrors {
        a: sq(&d.a, &a.a),
        b: sq(&d.b, &a.b),
        length: (d.length - a.length).powi(2),
        theta: wrap_angle(d.theta - a.theta).powi(2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_l: f64,
    pub lambda_theta: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            lambda_a: 100.0,
            lambda_b: 100.0,
            lambda_l: 1.0,
            lambda_theta: 1.0,
        }
    }
}

pub fn weighted_error(e: &FsdErrors, w: &ObjectiveWeights) -> f64 {
    w.lambda_a * e.a + w.lambda_b * e.b + w.lambda_l * e.length + w.lambda_theta * e.theta
}

/// `f₀ = λ_a A_err + λ_b B_err + λ_L L_err + λ_θ θ_err`.
pub fn objective(d: &FourierDescriptor, a: &FourierDescriptor, w: &ObjectiveWeights) -> Result<f64, ShapeError> {
    Ok(weighted_error(&fsd_errors(d, a)?, w))
}

/// Denominator used by the relative shape change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaMode {
    /// divide every term by the last desired magnitude `R_n^d`
    #[default]
    LastHarmonic,
    /// divide term `m` by `R_m^d`
    PerHarmonic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeInvariants {
    pub zeta_s: f64,
    pub zeta_l: f64,
}

/// Relative shape change ζ_s and length change ζ_l of `a` against `d`.
pub fn shape_invariants(d: &FourierDescriptor, a: &FourierDescriptor, mode: ZetaMode) -> Result<ShapeInvariants, ShapeError> {
    if d.harmonics() != a.harmonics() {
        return Err(ShapeError::SizeMismatch(d.harmonics(), a.harmonics()));
    }
    let rd = d.magnitudes();
    let ra = a.magnitudes();
    let n = rd.len();
    if n == 0 || d.length == 0.0 {
        return Err(ShapeError::UndefinedInvariant);
    }
    let mut sum = 0.0;
    for m in 0..n {
        let den = match mode {
            ZetaMode::LastHarmonic => rd[n - 1],
            ZetaMode::PerHarmonic => rd[m],
        };
        if den == 0.0 {
            return Err(ShapeError::UndefinedInvariant);
        }
        sum += (rd[m] - ra[m]).abs() / den;
    }
    Ok(ShapeInvariants {
        zeta_s: sum / n as f64,
        zeta_l: (d.length - a.length).abs() / d.length,
    })
}

/// Two-column `x y` point list; blank lines and `#` comments are skipped.
pub fn parse_curve(text: &str) -> Result<Vec<Vec2>, ShapeError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 2 {
            return Err(ShapeError::Parse {
                line: i + 1,
                reason: format!("expected 2 columns, found {}", vals.len()),
            });
        }
        let mut xy = [0.0; 2];
        for (k, v) in vals.iter().enumerate() {
            xy[k] = v.parse::<f64>().map_err(|e| ShapeError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if !xy[k].is_finite() {
                return Err(ShapeError::Parse {
                    line: i + 1,
                    reason: "non-finite value".into(),
                });
            }
        }
        out.push(Vec2::new(xy[0], xy[1]));
    }
    Ok(out)
}

pub fn format_curve(points: &[Vec2]) -> String {
    let mut s = String::new();
    for p in points {
        let _ = writeln!(s, "{:.17e} {:.17e}", p.x, p.y);
    }
    s
}
