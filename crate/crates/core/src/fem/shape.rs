//! Mean value shape functions on arbitrary simple polygons.
//!
//! With `s_i = v_i − p`, `r_i = |s_i|`, `A_i = ½ s_i × s_{i+1}` and
//! `D_i = s_i · s_{i+1}`, the half-angle tangents are evaluated as
//! `tan(α_i/2) = 2A_i / (r_i r_{i+1} + D_i)`, which stays well conditioned
//! for small angles. Weights are `w_i = (tan(α_{i−1}/2) + tan(α_i/2)) / r_i`.

use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeFnError {
    #[error("evaluation point lies on the polygon boundary")]
    BoundaryPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec2>,
}

fn diameter(poly: &[Vec2]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..poly.len() {
        for j in (i + 1)..poly.len() {
            d = d.max((poly[i] - poly[j]).norm());
        }
    }
    d
}

/// Values and gradients of the mean value shape functions at `p`.
pub fn mean_value_shape_functions(poly: &[Vec2], p: &Vec2) -> Result<ShapeValues, ShapeFnError> {
    let n = poly.len();
    let scale = diameter(poly);
    let s: Vec<Vec2> = poly.iter().map(|v| v - p).collect();
    let r: Vec<f64> = s.iter().map(|v| v.norm()).collect();
    if r.iter().any(|&ri| ri <= 1e-14 * scale) {
        return Err(ShapeFnError::BoundaryPoint);
    }
    let grad_r: Vec<Vec2> = (0..n).map(|i| -s[i] / r[i]).collect();

    // half-angle tangents per edge and their gradients
    let mut t = vec![0.0; n];
    let mut grad_t = vec![Vec2::zeros(); n];
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (&s[i], &s[j]);
        let area = 0.5 * (a.x * b.y - a.y * b.x);
        let dot = a.dot(b);
        let rr = r[i] * r[j];
        let grad_area = Vec2::new(a.y - b.y, b.x - a.x) * 0.5;
        let grad_dot = -(a + b);
        let grad_rr = grad_r[i] * r[j] + grad_r[j] * r[i];
        if dot >= 0.0 {
            // tan(α/2) = sin α / (1 + cos α)
            let den = rr + dot;
            let grad_den = grad_rr + grad_dot;
            t[i] = 2.0 * area / den;
            grad_t[i] = (grad_area * (2.0 * den) - grad_den * (2.0 * area)) / (den * den);
        } else {
            // tan(α/2) = (1 − cos α) / sin α, no cancellation near α = π
            if area.abs() <= 1e-14 * rr {
                return Err(ShapeFnError::BoundaryPoint);
            }
            let num = rr - dot;
            let grad_num = grad_rr - grad_dot;
            let c = 2.0 * area;
            t[i] = num / c;
            grad_t[i] = (grad_num * c - grad_area * (2.0 * num)) / (c * c);
        }
    }

    let mut w = vec![0.0; n];
    let mut grad_w = vec![Vec2::zeros(); n];
    for i in 0..n {
        let h = (i + n - 1) % n;
        let num = t[h] + t[i];
        w[i] = num / r[i];
        grad_w[i] = (grad_t[h] + grad_t[i]) / r[i] - grad_r[i] * (num / (r[i] * r[i]));
    }
    let total: f64 = w.iter().sum();
    let grad_total: Vec2 = grad_w.iter().sum();
    let values: Vec<f64> = w.iter().map(|wi| wi / total).collect();
    let gradients = (0..n)
        .map(|i| (grad_w[i] - grad_total * values[i]) / total)
        .collect();
    Ok(ShapeValues { values, gradients })
}
