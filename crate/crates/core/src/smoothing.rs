//! Boundary resolution and smoothing of honeycomb candidates.
//!
//! Each pass moves every boundary node to the foot of its perpendicular on
//! the chord joining the midpoints of its two boundary edges. The second
//! removal step voids elements that a mask circle still reaches (a vertex
//! strictly inside) after centroid-based removal.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::design::{Mask, MaterialField};
use crate::geometry::{closest_point_on_segment, Vec2};
use crate::hexmesh::{BoundaryEdge, HexMesh};

/// Default number of smoothing passes.
pub const DEFAULT_PASSES: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum SmoothingError {
    #[error("boundary node {node} has {count} incident boundary edges")]
    NonManifold { node: usize, count: usize },
    #[error("pass count must be at least 1")]
    ZeroPasses,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmoothedBoundary {
    pub moved_node_ids: BTreeSet<usize>,
    pub displaced_positions: BTreeMap<usize, Vec2>,
    pub pass_count: usize,
}

impl SmoothedBoundary {
    /// Overlay the displaced positions on `base`.
    pub fn apply(&self, base: &[Vec2]) -> Vec<Vec2> {
        let mut out = base.to_vec();
        for (&n, p) in &self.displaced_positions {
            out[n] = *p;
        }
        out
    }
}

/// (previous, next) neighbor on the boundary for every boundary node.
fn boundary_neighbors(boundary: &[BoundaryEdge]) -> Result<BTreeMap<usize, (usize, usize)>, SmoothingError> {
    let mut incoming: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in boundary {
        let (p, q) = e.node_pair;
        outgoing.entry(p).or_default().push(q);
        incoming.entry(q).or_default().push(p);
    }
    let mut nodes: BTreeSet<usize> = incoming.keys().copied().collect();
    nodes.extend(outgoing.keys().copied());
    let mut out = BTreeMap::new();
    for n in nodes {
        let inc = incoming.get(&n).map_or(&[][..], |v| v.as_slice());
        let outg = outgoing.get(&n).map_or(&[][..], |v| v.as_slice());
        if inc.len() != 1 || outg.len() != 1 {
            return Err(SmoothingError::NonManifold {
                node: n,
                count: inc.len() + outg.len(),
            });
        }
        out.insert(n, (inc[0], outg[0]));
    }
    Ok(out)
}

/// Foot of the perpendicular from `node` on the chord between the midpoints
/// of edges `prev–node` and `node–next`, clamped to the chord.
pub fn midpoint_chord_projection(prev: &Vec2, node: &Vec2, next: &Vec2) -> Vec2 {
    let m1 = (prev + node) / 2.0;
    let m2 = (node + next) / 2.0;
    closest_point_on_segment(node, &m1, &m2).0
}

/// One smoothing pass. All nodes are projected from the same input positions.
pub fn smooth_pass(positions: &[Vec2], boundary: &[BoundaryEdge]) -> Result<SmoothedBoundary, SmoothingError> {
    let nbrs = boundary_neighbors(boundary)?;
    let mut out = SmoothedBoundary {
        pass_count: 1,
        ..Default::default()
    };
    for (&n, &(p, q)) in &nbrs {
        let foot = midpoint_chord_projection(&positions[p], &positions[n], &positions[q]);
        out.moved_node_ids.insert(n);
        out.displaced_positions.insert(n, foot);
    }
    Ok(out)
}

/// `passes` successive smoothing passes, midpoints recomputed every pass.
pub fn smooth(
    positions: &[Vec2],
    boundary: &[BoundaryEdge],
    passes: usize,
) -> Result<SmoothedBoundary, SmoothingError> {
    if passes == 0 {
        return Err(SmoothingError::ZeroPasses);
    }
    let nbrs = boundary_neighbors(boundary)?;
    let mut current = positions.to_vec();
    let mut scratch = current.clone();
    for _ in 0..passes {
        for (&n, &(p, q)) in &nbrs {
            scratch[n] = midpoint_chord_projection(&current[p], &current[n], &current[q]);
        }
        std::mem::swap(&mut current, &mut scratch);
    }
    Ok(SmoothedBoundary {
        moved_node_ids: nbrs.keys().copied().collect(),
        displaced_positions: nbrs.keys().map(|&n| (n, current[n])).collect(),
        pass_count: passes,
    })
}

/// Void every solid element with a vertex strictly inside a mask circle,
/// using the vertex positions after the first smoothing.
pub fn second_step_removal(
    material: &MaterialField,
    masks: &[Mask],
    mesh: &HexMesh,
    smoothed: &SmoothedBoundary,
) -> MaterialField {
    let positions = smoothed.apply(&mesh.positions());
    MaterialField {
        rho: mesh
            .elements
            .iter()
            .map(|e| {
                material.is_solid(e.id)
                    && !e
                        .node_ids
                        .iter()
                        .any(|&n| masks.iter().any(|m| m.covers(&positions[n])))
            })
            .collect(),
    }
}
