//! Negative circular masks and everything derived from them: the element
//! material field, rigid contact circles, protection of shape-morphing
//! elements, connectivity feasibility and volume.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use log::warn;
use thiserror::Error;

use crate::geometry::Vec2;
use crate::hexmesh::HexMesh;

const MAX_SHIFT_ATTEMPTS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum DesignError {
    #[error("design file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("shape-morphing set is empty")]
    EmptyShapeMorphingSet,
    #[error("shape-morphing elements are not edge-connected")]
    DisconnectedShapeMorphingSet,
}

/// One negative circular mask `(x, y, r, s, f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mask {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    /// spawn a rigid contact circle of radius `f·r`
    pub s: bool,
    pub f: f64,
}

impl Mask {
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Strict containment.
    pub fn covers(&self, p: &Vec2) -> bool {
        (p - self.center()).norm_squared() < self.r * self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector {
    pub masks: Vec<Mask>,
    pub input_force: f64,
}

impl DesignVector {
    /// Number of scalar design variables, `5·N_m + 1`.
    pub fn variable_count(&self) -> usize {
        5 * self.masks.len() + 1
    }

    /// One `x y r s f` line per mask followed by `F <force>`; 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in &self.masks {
            let _ = writeln!(
                out,
                "{:.16e} {:.16e} {:.16e} {} {:.16e}",
                m.x,
                m.y,
                m.r,
                u8::from(m.s),
                m.f
            );
        }
        let _ = writeln!(out, "F {:.16e}", self.input_force);
        out
    }

    pub fn from_text(text: &str) -> Result<DesignVector, DesignError> {
        let mut masks = Vec::new();
        let mut force = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| DesignError::Parse { line: i + 1, reason };
            if force.is_some() {
                return Err(err("content after the force line".into()));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "F" {
                if fields.len() != 2 {
                    return Err(err("expected `F <force>`".into()));
                }
                force = Some(fields[1].parse::<f64>().map_err(|e| err(e.to_string()))?);
                continue;
            }
            if fields.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", fields.len())));
            }
            let num = |k: usize| fields[k].parse::<f64>().map_err(|e| err(e.to_string()));
            let s = match fields[3] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("binary variable must be 0 or 1, got `{other}`"))),
            };
            masks.push(Mask {
                x: num(0)?,
                y: num(1)?,
                r: num(2)?,
                s,
                f: num(4)?,
            });
        }
        let input_force = force.ok_or(DesignError::Parse {
            line: text.lines().count(),
            reason: "missing `F <force>` line".into(),
        })?;
        Ok(DesignVector { masks, input_force })
    }
}

/// Binary element states, `true` = solid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterialField {
    pub rho: Vec<bool>,
}

impl MaterialField {
    pub fn all_solid(n: usize) -> Self {
        MaterialField { rho: vec![true; n] }
    }

    pub fn all_void(n: usize) -> Self {
        MaterialField { rho: vec![false; n] }
    }

    #[inline]
    pub fn is_solid(&self, element: usize) -> bool {
        self.rho[element]
    }

    pub fn solid_count(&self) -> usize {
        self.rho.iter().filter(|&&s| s).count()
    }

    pub fn solid_elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.rho.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidSurface {
    /// index of the generating mask
    pub mask: usize,
    pub center: Vec2,
    pub radius: f64,
    /// closed counter-clockwise chord polyline (last point joins the first)
    pub points: Vec<Vec2>,
}

/// Shape-morphing nodes and the elements they protect.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMorphingSet {
    pub node_ids: Vec<usize>,
    pub element_ids: Vec<usize>,
}

impl ShapeMorphingSet {
    /// Every element touching an SMN becomes an SME.
    pub fn from_nodes(mesh: &HexMesh, node_ids: Vec<usize>) -> Result<Self, DesignError> {
        if node_ids.is_empty() {
            return Err(DesignError::EmptyShapeMorphingSet);
        }
        let mut element_ids: Vec<usize> = node_ids
            .iter()
            .flat_map(|&n| mesh.node_elements(n).iter().copied())
            .collect();
        element_ids.sort_unstable();
        element_ids.dedup();
        let mut field = MaterialField::all_void(mesh.elements.len());
        for &e in &element_ids {
            field.rho[e] = true;
        }
        let comp = solid_component(&field, mesh, element_ids[0]);
        if element_ids.iter().any(|&e| !comp[e]) {
            return Err(DesignError::DisconnectedShapeMorphingSet);
        }
        Ok(ShapeMorphingSet { node_ids, element_ids })
    }
}

/// Element void iff its centroid lies strictly inside some mask.
pub fn assign_material_states(mesh: &HexMesh, masks: &[Mask]) -> MaterialField {
    MaterialField {
        rho: (0..mesh.elements.len())
            .map(|e| {
                let c = mesh.centroid(e);
                !masks.iter().any(|m| m.covers(&c))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProtectionReport {
    pub shifted: Vec<usize>,
    /// masks whose radius had to be clamped to `r_min`
    pub clamped: Vec<usize>,
}

/// Translate masks off shape-morphing elements.
///
/// An offending mask moves along the ray from its nearest covered SME
/// centroid through its own center until that centroid clears the circle by
/// `0.05·a`. `bounds` are re-applied after every move.
pub fn protect_smes(
    masks: &[Mask],
    smes: &ShapeMorphingSet,
    mesh: &HexMesh,
    bounds: &MaskBounds,
) -> (Vec<Mask>, ProtectionReport) {
    let margin = 0.05 * mesh.edge_length;
    let centroids: Vec<Vec2> = smes.element_ids.iter().map(|&e| mesh.centroid(e)).collect();
    let sme_mean = centroids.iter().sum::<Vec2>() / centroids.len().max(1) as f64;
    let mut report = ProtectionReport::default();

    let shift = |m: &mut Mask| -> bool {
        for _ in 0..MAX_SHIFT_ATTEMPTS {
            let c = m.center();
            let nearest = centroids
                .iter()
                .filter(|p| m.covers(p))
                .min_by(|a, b| (*a - c).norm_squared().total_cmp(&(*b - c).norm_squared()));
            let Some(p) = nearest else {
                return true;
            };
            let mut dir = c - p;
            if dir.norm() < 1e-12 {
                dir = p - sme_mean;
            }
            if dir.norm() < 1e-12 {
                dir = Vec2::new(0.0, 1.0);
            }
            let moved = p + dir.normalize() * (m.r + margin);
            m.x = moved.x;
            m.y = moved.y;
            bounds.clamp_center(m);
        }
        !centroids.iter().any(|p| m.covers(p))
    };

    let out = masks
        .iter()
        .enumerate()
        .map(|(i, m0)| {
            if !centroids.iter().any(|p| m0.covers(p)) {
                return *m0;
            }
            let mut m = *m0;
            report.shifted.push(i);
            if !shift(&mut m) {
                warn!("mask {i} could not be cleared off the shape-morphing elements; clamping radius");
                m.r = bounds.r_min;
                m.x = m0.x;
                m.y = m0.y;
                report.clamped.push(i);
                shift(&mut m);
            }
            m
        })
        .collect();
    (out, report)
}

/// Box and radius limits applied to masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub r_min: f64,
    pub r_max: f64,
    pub f: (f64, f64),
}

impl MaskBounds {
    /// Centers limited to the mesh bounding box inflated by `r_max`.
    pub fn for_mesh(mesh: &HexMesh, r_min: f64, r_max: f64) -> Self {
        let (lo, hi) = mesh.bounding_box();
        MaskBounds {
            x: (lo.x - r_max, hi.x + r_max),
            y: (lo.y - r_max, hi.y + r_max),
            r_min,
            r_max,
            f: (0.01, 0.99),
        }
    }

    pub fn clamp_center(&self, m: &mut Mask) {
        m.x = m.x.clamp(self.x.0, self.x.1);
        m.y = m.y.clamp(self.y.0, self.y.1);
    }

    pub fn clamp(&self, m: &mut Mask) {
        self.clamp_center(m);
        m.r = m.r.clamp(self.r_min, self.r_max);
        m.f = m.f.clamp(self.f.0, self.f.1);
    }

    pub fn contains(&self, m: &Mask) -> bool {
        (self.x.0..=self.x.1).contains(&m.x)
            && (self.y.0..=self.y.1).contains(&m.y)
            && (self.r_min..=self.r_max).contains(&m.r)
            && (self.f.0..=self.f.1).contains(&m.f)
    }
}

/// One rigid circle of radius `f·r` per mask with `s = 1`.
pub fn generate_rigid_surfaces(masks: &[Mask], segment_count: usize) -> Vec<RigidSurface> {
    let n = segment_count.max(8);
    masks
        .iter()
        .enumerate()
        .filter(|(_, m)| m.s)
        .map(|(i, m)| {
            let radius = m.f * m.r;
            let center = m.center();
            let points = (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    center + Vec2::new(t.cos(), t.sin()) * radius
                })
                .collect();
            RigidSurface {
                mask: i,
                center,
                radius,
                points,
            }
        })
        .collect()
}

/// A connection requirement satisfied by any one of its elements being solid.
#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub elements: Vec<usize>,
}

impl Port {
    pub fn single(element: usize) -> Self {
        Port { elements: vec![element] }
    }
}

/// Solid elements edge-reachable from `seed` (breadth-first flood fill).
pub fn solid_component(material: &MaterialField, mesh: &HexMesh, seed: usize) -> Vec<bool> {
    let mut seen = vec![false; mesh.elements.len()];
    if !material.is_solid(seed) {
        return seen;
    }
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    while let Some(e) = queue.pop_front() {
        for nb in mesh.neighbors(e).iter().flatten() {
            if material.is_solid(*nb) && !seen[*nb] {
                seen[*nb] = true;
                queue.push_back(*nb);
            }
        }
    }
    seen
}

/// Component mask that satisfies all ports, if any.
pub fn connected_ports_component(
    material: &MaterialField,
    mesh: &HexMesh,
    ports: &[Port],
) -> Option<Vec<bool>> {
    let first = ports.first()?;
    for &seed in first.elements.iter().filter(|&&e| material.is_solid(e)) {
        let comp = solid_component(material, mesh, seed);
        if ports.iter().all(|p| p.elements.iter().any(|&e| comp[e])) {
            return Some(comp);
        }
    }
    None
}

/// True iff every port has a solid element and all lie in one solid component.
pub fn check_feasibility(material: &MaterialField, mesh: &HexMesh, ports: &[Port]) -> bool {
    connected_ports_component(material, mesh, ports).is_some()
}

/// Solid fraction; every cell has the same area.
pub fn volume_fraction(material: &MaterialField) -> f64 {
    if material.rho.is_empty() {
        return 0.0;
    }
    material.solid_count() as f64 / material.rho.len() as f64
}
