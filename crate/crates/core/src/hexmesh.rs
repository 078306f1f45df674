//! Regular honeycomb discretization of a rectangular design domain.
//!
//! Flat-top hexagons are stacked in offset columns; odd columns sit half a
//! cell (√3·a/2) lower than even ones. The origin is the lower-left corner of
//! the nominal domain `cols·3a/2 × rows·√3a`; even columns overhang it by
//! √3·a/2 at the top and the last column by a/2 on the right.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::design::MaterialField;
use crate::geometry::{point_in_polygon, right_normal, Containment, Vec2};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Boundary tolerance used by point location, in mm.
pub const LOCATE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("boundary node {0} has {1} incident boundary edges")]
    NonManifold(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HexElement {
    pub id: usize,
    /// Counter-clockwise, starting at the vertex on the +x axis of the cell.
    pub node_ids: [usize; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// Ordered so that the owning solid lies to the left of `node_pair.0 → node_pair.1`.
    pub node_pair: (usize, usize),
    pub owner_element: usize,
    pub outward_normal: Vec2,
}

#[derive(Debug, Clone)]
pub struct HexMesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<HexElement>,
    pub edge_length: f64,
    pub rows: usize,
    pub cols: usize,
    centroids: Vec<Vec2>,
    /// neighbor across edge `k` (vertex k → k+1) of each element
    neighbors: Vec<[Option<usize>; 6]>,
    node_elements: Vec<Vec<usize>>,
}

impl HexMesh {
    /// Build a `cols × rows` honeycomb with edge length `edge_length` (mm).
    pub fn generate_grid(cols: usize, rows: usize, edge_length: f64) -> Result<HexMesh, MeshError> {
        if cols == 0 {
            return Err(MeshError::InvalidArgument {
                name: "cols",
                reason: "must be at least 1".into(),
            });
        }
        if rows == 0 {
            return Err(MeshError::InvalidArgument {
                name: "rows",
                reason: "must be at least 1".into(),
            });
        }
        if !(edge_length > 0.0) || !edge_length.is_finite() {
            return Err(MeshError::InvalidArgument {
                name: "edge_length",
                reason: format!("must be positive and finite, got {edge_length}"),
            });
        }
        let a = edge_length;
        // Lattice coordinates: x = ix·a/2, y = iy·√3a/2.
        let offsets: [(i64, i64); 6] = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)];
        let mut lattice: HashMap<(i64, i64), usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut elements = Vec::with_capacity(cols * rows);
        let mut centroids = Vec::with_capacity(cols * rows);
        for c in 0..cols {
            for r in 0..rows {
                let cx = 2 + 3 * c as i64;
                let cy = if c % 2 == 0 { 2 } else { 1 } + 2 * r as i64;
                let mut ids = [0usize; 6];
                for (k, (dx, dy)) in offsets.iter().enumerate() {
                    let key = (cx + dx, cy + dy);
                    let next = nodes.len();
                    let id = *lattice.entry(key).or_insert(next);
                    if id == next {
                        nodes.push(Node {
                            id,
                            position: Vec2::new(key.0 as f64 * a / 2.0, key.1 as f64 * SQRT3 * a / 2.0),
                        });
                    }
                    ids[k] = id;
                }
                let id = elements.len();
                elements.push(HexElement { id, node_ids: ids });
                centroids.push(Vec2::new(cx as f64 * a / 2.0, cy as f64 * SQRT3 * a / 2.0));
            }
        }

        let mut edge_map: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for e in &elements {
            for k in 0..6 {
                let (p, q) = (e.node_ids[k], e.node_ids[(k + 1) % 6]);
                edge_map.entry((p.min(q), p.max(q))).or_default().push((e.id, k));
            }
        }
        let mut neighbors = vec![[None; 6]; elements.len()];
        for owners in edge_map.values() {
            if let [(e0, k0), (e1, k1)] = owners.as_slice() {
                neighbors[*e0][*k0] = Some(*e1);
                neighbors[*e1][*k1] = Some(*e0);
            }
        }
        let mut node_elements = vec![Vec::new(); nodes.len()];
        for e in &elements {
            for &n in &e.node_ids {
                node_elements[n].push(e.id);
            }
        }

        Ok(HexMesh {
            nodes,
            elements,
            edge_length,
            rows,
            cols,
            centroids,
            neighbors,
            node_elements,
        })
    }

    /// Nominal domain extents `(cols·3a/2, rows·√3a)`.
    pub fn domain_extents(&self) -> (f64, f64) {
        (
            self.cols as f64 * 1.5 * self.edge_length,
            self.rows as f64 * SQRT3 * self.edge_length,
        )
    }

    /// Axis-aligned bounding box of all nodes, `(min, max)`.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for n in &self.nodes {
            lo = lo.inf(&n.position);
            hi = hi.sup(&n.position);
        }
        (lo, hi)
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn centroid(&self, element: usize) -> Vec2 {
        self.centroids[element]
    }

    /// Area of one regular cell, `3√3/2·a²`.
    pub fn element_area(&self) -> f64 {
        1.5 * SQRT3 * self.edge_length * self.edge_length
    }

    pub fn polygon(&self, element: usize) -> [Vec2; 6] {
        self.elements[element].node_ids.map(|n| self.nodes[n].position)
    }

    pub fn neighbors(&self, element: usize) -> &[Option<usize>; 6] {
        &self.neighbors[element]
    }

    /// Elements incident to a node, in increasing id order.
    pub fn node_elements(&self, node: usize) -> &[usize] {
        &self.node_elements[node]
    }

    pub fn nearest_node(&self, p: &Vec2) -> usize {
        self.nodes
            .iter()
            .min_by(|a, b| {
                (a.position - p)
                    .norm_squared()
                    .total_cmp(&(b.position - p).norm_squared())
            })
            .map(|n| n.id)
            .expect("mesh has nodes")
    }

    /// Element containing `p`; ties on shared edges go to the lowest id.
    pub fn locate_point(&self, p: &Vec2) -> Option<usize> {
        let a = self.edge_length;
        let c0 = ((p.x - a / 2.0) / (1.5 * a)).floor() as i64;
        let mut best: Option<usize> = None;
        for c in (c0 - 1)..=(c0 + 1) {
            if c < 0 || c >= self.cols as i64 {
                continue;
            }
            let base = if c % 2 == 0 { SQRT3 * a } else { SQRT3 * a / 2.0 };
            let r0 = ((p.y - base) / (SQRT3 * a)).round() as i64;
            for r in (r0 - 1)..=(r0 + 1) {
                if r < 0 || r >= self.rows as i64 {
                    continue;
                }
                let id = c as usize * self.rows + r as usize;
                if point_in_polygon(p, &self.polygon(id), LOCATE_TOL) != Containment::Outside {
                    best = Some(best.map_or(id, |b| b.min(id)));
                }
            }
        }
        best
    }

    /// Edges incident to exactly one solid element.
    pub fn boundary_edges(&self, material: &MaterialField) -> Vec<BoundaryEdge> {
        let mut out = Vec::new();
        for e in &self.elements {
            if !material.is_solid(e.id) {
                continue;
            }
            for k in 0..6 {
                let shared = self.neighbors[e.id][k].is_some_and(|nb| material.is_solid(nb));
                if shared {
                    continue;
                }
                let (p, q) = (e.node_ids[k], e.node_ids[(k + 1) % 6]);
                out.push(BoundaryEdge {
                    node_pair: (p, q),
                    owner_element: e.id,
                    outward_normal: right_normal(&self.nodes[p].position, &self.nodes[q].position),
                });
            }
        }
        out
    }

    /// Plain-text listing: `N id x y` per node, then `E id n0 … n5` per element.
    pub fn write_listing<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# honeycomb {}x{} edge_length {}",
            self.cols, self.rows, self.edge_length
        )?;
        for n in &self.nodes {
            writeln!(w, "N {} {} {}", n.id, n.position.x, n.position.y)?;
        }
        for e in &self.elements {
            let ids: Vec<String> = e.node_ids.iter().map(|i| i.to_string()).collect();
            writeln!(w, "E {} {}", e.id, ids.join(" "))?;
        }
        Ok(())
    }
}

/// Chain directed boundary edges into closed node loops.
///
/// Every node touched by the boundary must have exactly one incoming and one
/// outgoing edge, otherwise the boundary is non-manifold.
pub fn boundary_loops(edges: &[BoundaryEdge]) -> Result<Vec<Vec<usize>>, MeshError> {
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut degree: HashMap<usize, usize> = HashMap::new();
    for e in edges {
        let (p, q) = e.node_pair;
        *degree.entry(p).or_default() += 1;
        *degree.entry(q).or_default() += 1;
        if next.insert(p, q).is_some() {
            return Err(MeshError::NonManifold(p, degree[&p]));
        }
    }
    let mut bad: Vec<(usize, usize)> = degree.iter().filter(|(_, &d)| d != 2).map(|(&n, &d)| (n, d)).collect();
    if !bad.is_empty() {
        bad.sort_unstable();
        return Err(MeshError::NonManifold(bad[0].0, bad[0].1));
    }
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut visited: HashMap<usize, bool> = HashMap::new();
    let mut loops = Vec::new();
    for s in starts {
        if visited.contains_key(&s) {
            continue;
        }
        let mut lp = vec![s];
        visited.insert(s, true);
        let mut cur = next[&s];
        while cur != s {
            if visited.insert(cur, true).is_some() {
                return Err(MeshError::NonManifold(cur, 2));
            }
            lp.push(cur);
            cur = *next.get(&cur).ok_or(MeshError::NonManifold(cur, 1))?;
        }
        loops.push(lp);
    }
    Ok(loops)
}
