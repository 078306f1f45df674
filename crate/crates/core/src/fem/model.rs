//! Polygonal finite elements: quadrature, internal forces and the
//! updated-Lagrangian tangent.

use nalgebra::Matrix2;
use thiserror::Error;

use super::material::{cauchy_stress, spatial_moduli, strain_energy_density, MaterialError, MaterialParams};
use super::shape::{mean_value_shape_functions, ShapeFnError};
use super::sparse::CooMatrix;
use crate::geometry::{polygon_centroid, signed_area, triangulate_ear_clip, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum ElementError {
    #[error("element {element}: polygon has {count} vertices")]
    TooFewVertices { element: usize, count: usize },
    #[error("element {element}: non-positive area {area}")]
    NonPositiveArea { element: usize, area: f64 },
    #[error("element {element}: polygon cannot be triangulated")]
    Triangulation { element: usize },
    #[error("element {element}: {source}")]
    ShapeFunction { element: usize, source: ShapeFnError },
    #[error("element {element}: {source}")]
    Material { element: usize, source: MaterialError },
}

/// Reference-configuration data at one quadrature point.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub position: Vec2,
    /// reference area weight (mm²)
    pub weight: f64,
    pub values: Vec<f64>,
    /// reference gradients ∇_X N_a
    pub gradients: Vec<Vec2>,
}

#[derive(Debug, Clone)]
pub struct PolygonElement {
    pub node_ids: Vec<usize>,
    pub quadrature: Vec<QuadPoint>,
}

const GAUSS3: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Sub-triangles used for integration: a fan from the area centroid when
/// every fan triangle is positive, an ear-clipping triangulation otherwise.
pub fn integration_cells(poly: &[Vec2]) -> Option<Vec<[Vec2; 3]>> {
    let area = signed_area(poly);
    if !(area > 0.0) {
        return None;
    }
    let c = polygon_centroid(poly);
    let n = poly.len();
    let fan: Vec<[Vec2; 3]> = (0..n).map(|i| [c, poly[i], poly[(i + 1) % n]]).collect();
    if fan.iter().all(|t| signed_area(t) > 1e-12 * area) {
        return Some(fan);
    }
    let tris = triangulate_ear_clip(poly)?;
    Some(tris.iter().map(|t| [poly[t[0]], poly[t[1]], poly[t[2]]]).collect())
}

impl PolygonElement {
    pub fn new(id: usize, node_ids: Vec<usize>, positions: &[Vec2]) -> Result<Self, ElementError> {
        if node_ids.len() < 3 {
            return Err(ElementError::TooFewVertices {
                element: id,
                count: node_ids.len(),
            });
        }
        let poly: Vec<Vec2> = node_ids.iter().map(|&n| positions[n]).collect();
        let area = signed_area(&poly);
        if !(area > 0.0) {
            return Err(ElementError::NonPositiveArea { element: id, area });
        }
        let cells = integration_cells(&poly).ok_or(ElementError::Triangulation { element: id })?;
        let mut quadrature = Vec::with_capacity(3 * cells.len());
        for tri in &cells {
            let ta = signed_area(tri);
            for bary in &GAUSS3 {
                let p = tri[0] * bary[0] + tri[1] * bary[1] + tri[2] * bary[2];
                let sv = mean_value_shape_functions(&poly, &p)
                    .map_err(|source| ElementError::ShapeFunction { element: id, source })?;
                quadrature.push(QuadPoint {
                    position: p,
                    weight: ta / 3.0,
                    values: sv.values,
                    gradients: sv.gradients,
                });
            }
        }
        Ok(PolygonElement { node_ids, quadrature })
    }

    pub fn area(&self) -> f64 {
        self.quadrature.iter().map(|q| q.weight).sum()
    }

    /// Deformation gradient at quadrature point `q` for nodal displacements `u`.
    pub fn deformation_gradient(&self, q: usize, u: &[f64]) -> Matrix2<f64> {
        let qp = &self.quadrature[q];
        let mut f = Matrix2::identity();
        for (a, &n) in self.node_ids.iter().enumerate() {
            let ua = Vec2::new(u[2 * n], u[2 * n + 1]);
            f += ua * qp.gradients[a].transpose();
        }
        f
    }
}

/// A set of polygonal elements with one material, acting on a global
/// displacement vector of length `2 · n_nodes`.
#[derive(Debug, Clone)]
pub struct FeModel {
    pub n_nodes: usize,
    pub elements: Vec<PolygonElement>,
    pub material: MaterialParams,
}

impl FeModel {
    /// Elements are integrated on `positions`, the reference configuration.
    pub fn new(positions: &[Vec2], polygons: &[Vec<usize>], material: MaterialParams) -> Result<Self, ElementError> {
        let elements = polygons
            .iter()
            .enumerate()
            .map(|(i, p)| PolygonElement::new(i, p.clone(), positions))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeModel {
            n_nodes: positions.len(),
            elements,
            material,
        })
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes
    }

    /// Nodes referenced by at least one element.
    pub fn active_nodes(&self) -> Vec<bool> {
        let mut used = vec![false; self.n_nodes];
        for e in &self.elements {
            for &n in &e.node_ids {
                used[n] = true;
            }
        }
        used
    }

    /// Total stored energy `∫ W dV`.
    pub fn strain_energy(&self, u: &[f64]) -> Result<f64, ElementError> {
        let mut total = 0.0;
        for (id, e) in self.elements.iter().enumerate() {
            for (q, qp) in e.quadrature.iter().enumerate() {
                let f = e.deformation_gradient(q, u);
                let w = strain_energy_density(&f, &self.material)
                    .map_err(|source| ElementError::Material { element: id, source })?;
                total += w * qp.weight * self.material.thickness;
            }
        }
        Ok(total)
    }

    /// Assembled `∫ B_ULᵀ σ dv` with `dv = t J dA`.
    pub fn internal_force(&self, u: &[f64]) -> Result<Vec<f64>, ElementError> {
        let mut out = vec![0.0; self.n_dofs()];
        let t = self.material.thickness;
        for (id, e) in self.elements.iter().enumerate() {
            for (q, qp) in e.quadrature.iter().enumerate() {
                let f = e.deformation_gradient(q, u);
                let sigma = cauchy_stress(&f, &self.material)
                    .map_err(|source| ElementError::Material { element: id, source })?;
                let j = f.determinant();
                let finv_t = f.try_inverse().expect("det F > 0").transpose();
                let dv = j * qp.weight * t;
                for (a, &n) in e.node_ids.iter().enumerate() {
                    let g = finv_t * qp.gradients[a];
                    let fa = sigma * g * dv;
                    out[2 * n] += fa.x;
                    out[2 * n + 1] += fa.y;
                }
            }
        }
        Ok(out)
    }

    /// Material plus geometric stiffness of the updated-Lagrangian element.
    pub fn tangent_stiffness(&self, u: &[f64]) -> Result<CooMatrix, ElementError> {
        let mut k = CooMatrix::new(self.n_dofs());
        let t = self.material.thickness;
        for (id, e) in self.elements.iter().enumerate() {
            let nn = e.node_ids.len();
            let mut ke = vec![0.0; 4 * nn * nn];
            let mut g = vec![Vec2::zeros(); nn];
            for (q, qp) in e.quadrature.iter().enumerate() {
                let f = e.deformation_gradient(q, u);
                let sigma = cauchy_stress(&f, &self.material)
                    .map_err(|source| ElementError::Material { element: id, source })?;
                let j = f.determinant();
                let finv_t = f.try_inverse().expect("det F > 0").transpose();
                let dv = j * qp.weight * t;
                let (lam, mu) = spatial_moduli(j, &self.material);
                let c11 = lam + 2.0 * mu;
                let c12 = lam;
                let c33 = mu;
                for a in 0..nn {
                    g[a] = finv_t * qp.gradients[a];
                }
                for a in 0..nn {
                    let ga = g[a];
                    let sga = sigma * ga;
                    for b in 0..nn {
                        let gb = g[b];
                        let geo = sga.dot(&gb);
                        let base = (2 * a) * (2 * nn) + 2 * b;
                        ke[base] += (ga.x * c11 * gb.x + ga.y * c33 * gb.y + geo) * dv;
                        ke[base + 1] += (ga.x * c12 * gb.y + ga.y * c33 * gb.x) * dv;
                        ke[base + 2 * nn] += (ga.y * c12 * gb.x + ga.x * c33 * gb.y) * dv;
                        ke[base + 2 * nn + 1] += (ga.y * c11 * gb.y + ga.x * c33 * gb.x + geo) * dv;
                    }
                }
            }
            for a in 0..nn {
                for da in 0..2 {
                    let row = 2 * e.node_ids[a] + da;
                    for b in 0..nn {
                        for db in 0..2 {
                            let col = 2 * e.node_ids[b] + db;
                            k.push(row, col, ke[(2 * a + da) * (2 * nn) + 2 * b + db]);
                        }
                    }
                }
            }
        }
        Ok(k)
    }

    /// Smallest `det F` over all quadrature points.
    pub fn min_jacobian(&self, u: &[f64]) -> f64 {
        self.elements
            .iter()
            .flat_map(|e| (0..e.quadrature.len()).map(move |q| e.deformation_gradient(q, u).determinant()))
            .fold(f64::INFINITY, f64::min)
    }
}

/// End-compliance `f_extᵀ u`.
pub fn end_compliance(f_ext: &[f64], u: &[f64]) -> f64 {
    f_ext.iter().zip(u).map(|(f, x)| f * x).sum()
}
