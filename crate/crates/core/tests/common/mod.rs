#![allow(dead_code)]

use morphsynth::contact::{ContactBody, ContactModel, ContactSettings, RigidCircle};
use morphsynth::design::MaterialField;
use morphsynth::fem::{FeModel, MaterialParams};
use morphsynth::geometry::Vec2;
use morphsynth::hexmesh::{boundary_loops, HexMesh};
use rand::Rng;

pub const E: f64 = 2100.0;
pub const NU: f64 = 0.33;

pub fn material() -> MaterialParams {
    MaterialParams::new(E, NU, 1.0).unwrap()
}

pub fn solid_model(mesh: &HexMesh) -> FeModel {
    let polys: Vec<Vec<usize>> = mesh.elements.iter().map(|e| e.node_ids.to_vec()).collect();
    FeModel::new(&mesh.positions(), &polys, material()).unwrap()
}

pub fn displaced(x: &[Vec2], u: &[f64]) -> Vec<Vec2> {
    x.iter().enumerate().map(|(i, p)| p + Vec2::new(u[2 * i], u[2 * i + 1])).collect()
}

/// Random polygon around the origin: convex (points on an ellipse) or
/// star-shaped with random radii.
pub fn random_polygon<R: Rng>(rng: &mut R, convex: bool) -> Vec<Vec2> {
    let n = rng.gen_range(3..=10);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    // keep vertices apart
    for k in 0..n {
        angles[k] = 0.7 * angles[k] + 0.3 * std::f64::consts::TAU * k as f64 / n as f64;
    }
    angles.sort_by(f64::total_cmp);
    let (ax, ay) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
    angles
        .iter()
        .map(|&t| {
            let r = if convex { 1.0 } else { rng.gen_range(0.3..1.0) };
            Vec2::new(ax * r * t.cos(), ay * r * t.sin())
        })
        .collect()
}

/// Two stacked 3×1 honeycomb strips of edge 1. The upper strip sits
/// `gap` above the tessellation position, so every bottom edge of the upper
/// strip faces a top edge of the lower one.
pub struct TwoBlocks {
    pub reference: Vec<Vec2>,
    pub model: FeModel,
    pub loops: Vec<Vec<usize>>,
    pub upper: Vec<usize>,
    pub lower: Vec<usize>,
}

pub fn two_blocks(gap: f64) -> TwoBlocks {
    let mesh = HexMesh::generate_grid(3, 1, 1.0).unwrap();
    let n = mesh.nodes.len();
    let shift = Vec2::new(0.0, mesh.rows as f64 * 3f64.sqrt() + gap);
    let mut reference = mesh.positions();
    reference.extend(mesh.positions().iter().map(|p| p + shift));
    let mut polys: Vec<Vec<usize>> = mesh.elements.iter().map(|e| e.node_ids.to_vec()).collect();
    polys.extend(
        mesh.elements
            .iter()
            .map(|e| e.node_ids.iter().map(|&k| k + n).collect::<Vec<_>>()),
    );
    let model = FeModel::new(&reference, &polys, material()).unwrap();
    let edges = mesh.boundary_edges(&MaterialField::all_solid(mesh.elements.len()));
    let lower_loops = boundary_loops(&edges).unwrap();
    let mut loops = lower_loops.clone();
    loops.extend(lower_loops.iter().map(|l| l.iter().map(|&k| k + n).collect::<Vec<_>>()));
    TwoBlocks {
        reference,
        model,
        loops,
        lower: (0..n).collect(),
        upper: (n..2 * n).collect(),
    }
}

pub fn settings(eps_self: f64, eps_mutual: f64) -> ContactSettings {
    ContactSettings {
        eps_mutual,
        eps_self,
        search_radius: 2.0,
        max_depth: 0.5,
        thickness: 1.0,
        self_contact: true,
    }
}

impl TwoBlocks {
    pub fn contact(&self, circles: Vec<RigidCircle>, eps_self: f64, eps_mutual: f64) -> ContactModel {
        ContactModel::new(
            ContactBody::from_loops(&self.loops),
            circles,
            self.reference.clone(),
            settings(eps_self, eps_mutual),
        )
    }

    /// Upper block pushed down by `depth` plus small random noise on every node.
    pub fn pressed_state<R: Rng>(&self, rng: &mut R, depth: f64, noise: f64) -> Vec<f64> {
        let mut u = vec![0.0; 2 * self.reference.len()];
        for &k in &self.upper {
            u[2 * k + 1] -= depth;
        }
        for v in u.iter_mut() {
            *v += rng.gen_range(-noise..noise);
        }
        u
    }
}

/// Central differences of a vector function, returned as a dense row-major matrix.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, u: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut cols = Vec::with_capacity(n);
    let mut up = u.to_vec();
    for j in 0..n {
        up[j] = u[j] + h;
        let fp = f(&up);
        up[j] = u[j] - h;
        let fm = f(&up);
        up[j] = u[j];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
    }
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// `‖A − B‖_F / ‖A‖_F` over dense matrices.
pub fn relative_frobenius(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            num += (x - y).powi(2);
            den += x * x;
        }
    }
    (num / den).sqrt()
}

pub fn dense(k: &morphsynth::fem::CooMatrix) -> Vec<Vec<f64>> {
    let m = k.to_dense();
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}
