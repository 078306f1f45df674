//! Frictionless self and mutual contact with a penalty inner loop and
//! Uzawa multiplier updates.
//!
//! Each slave boundary segment carries two Gauss points. At a point with gap
//! `g` (negative when penetrating) and multiplier `λ ≥ 0` the contact
//! pressure is `p = max(0, λ − ε g)`, derived from the potential
//! `φ(g) = p² / (2ε)`; with `λ = 0` this is the classical penalty traction
//! `−ε g n`. Gaps are measured to flexible master segments (self contact) or
//! to analytic rigid circles (mutual contact).

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::fem::{ContactHook, CooMatrix, HookFailure};
use crate::geometry::{closest_point_on_segment, point_segment_distance, segment_distance, Vec2};

const GAUSS_XI: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

#[derive(Debug, Error, PartialEq)]
pub enum ContactError {
    #[error("point coincides with the rigid circle center")]
    DegenerateProjection,
    #[error("empty projection target")]
    EmptyTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContactSegment {
    pub id: usize,
    /// global node ids, solid on the left of `nodes[0] → nodes[1]`
    pub nodes: [usize; 2],
    pub loop_id: usize,
    pub loop_index: usize,
}

/// Boundary segments of the flexible body, one closed loop per boundary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactBody {
    pub segments: Vec<ContactSegment>,
    pub loop_lengths: Vec<usize>,
}

impl ContactBody {
    pub fn from_loops(loops: &[Vec<usize>]) -> Self {
        let mut segments = Vec::new();
        for (l, lp) in loops.iter().enumerate() {
            for k in 0..lp.len() {
                segments.push(ContactSegment {
                    id: segments.len(),
                    nodes: [lp[k], lp[(k + 1) % lp.len()]],
                    loop_id: l,
                    loop_index: k,
                });
            }
        }
        ContactBody {
            segments,
            loop_lengths: loops.iter().map(Vec::len).collect(),
        }
    }

    /// Segments sharing a node or within two positions along one loop.
    pub fn excluded(&self, a: usize, b: usize) -> bool {
        let (sa, sb) = (&self.segments[a], &self.segments[b]);
        if sa.nodes.iter().any(|n| sb.nodes.contains(n)) {
            return true;
        }
        if sa.loop_id != sb.loop_id {
            return false;
        }
        let n = self.loop_lengths[sa.loop_id];
        let d = sa.loop_index.abs_diff(sb.loop_index);
        d.min(n - d) <= 2
    }

    fn ends(&self, s: usize, x: &[Vec2]) -> (Vec2, Vec2) {
        let seg = &self.segments[s];
        (x[seg.nodes[0]], x[seg.nodes[1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidCircle {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Master {
    Segment(usize),
    Rigid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactMode {
    SelfContact,
    Mutual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContactPair {
    pub slave: usize,
    pub master: Master,
    pub mode: ContactMode,
    pub active: bool,
}

/// Distance from segment `ab` to the solid disk of `c`.
fn disk_distance(a: &Vec2, b: &Vec2, c: &RigidCircle) -> f64 {
    (point_segment_distance(&c.center, a, b) - c.radius).max(0.0)
}

/// Candidate pairs within `search_radius`, found through a uniform spatial
/// hash over segment bounding boxes.
pub fn detect_pairs(body: &ContactBody, circles: &[RigidCircle], x: &[Vec2], search_radius: f64) -> Vec<ContactPair> {
    let mut pairs = Vec::new();
    let n = body.segments.len();
    if n > 0 {
        let mean_len = body
            .segments
            .iter()
            .map(|s| (x[s.nodes[1]] - x[s.nodes[0]]).norm())
            .sum::<f64>()
            / n as f64;
        let h = search_radius.max(mean_len).max(1e-12);
        let cell = |p: f64| (p / h).floor() as i64;
        let bbox = |s: usize, grow: f64| {
            let (a, b) = body.ends(s, x);
            (
                cell(a.x.min(b.x) - grow),
                cell(a.y.min(b.y) - grow),
                cell(a.x.max(b.x) + grow),
                cell(a.y.max(b.y) + grow),
            )
        };
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for s in 0..n {
            let (x0, y0, x1, y1) = bbox(s, 0.0);
            for i in x0..=x1 {
                for j in y0..=y1 {
                    grid.entry((i, j)).or_default().push(s);
                }
            }
        }
        let mut found: Vec<usize> = Vec::new();
        for s in 0..n {
            found.clear();
            let (x0, y0, x1, y1) = bbox(s, search_radius);
            for i in x0..=x1 {
                for j in y0..=y1 {
                    if let Some(list) = grid.get(&(i, j)) {
                        found.extend(list.iter().copied().filter(|&m| m > s));
                    }
                }
            }
            found.sort_unstable();
            found.dedup();
            let (a, b) = body.ends(s, x);
            for &m in &found {
                if body.excluded(s, m) {
                    continue;
                }
                let (c, d) = body.ends(m, x);
                if segment_distance(&a, &b, &c, &d) <= search_radius {
                    pairs.push(ContactPair {
                        slave: s,
                        master: Master::Segment(m),
                        mode: ContactMode::SelfContact,
                        active: false,
                    });
                }
            }
        }
    }
    for s in 0..n {
        let (a, b) = body.ends(s, x);
        for (ci, c) in circles.iter().enumerate() {
            if disk_distance(&a, &b, c) <= search_radius {
                pairs.push(ContactPair {
                    slave: s,
                    master: Master::Rigid(ci),
                    mode: ContactMode::Mutual,
                    active: false,
                });
            }
        }
    }
    pairs.sort_by_key(|p| (p.slave, p.master));
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Vec2,
    pub normal: Vec2,
    /// segment parameter in [0, 1], or the polar angle on a circle
    pub xi: f64,
    pub gap: f64,
    /// index into the target segment list
    pub segment: Option<usize>,
}

/// Closest point on a set of master segments; ties go to the lower index.
pub fn project_to_segments(x: &Vec2, segments: &[(Vec2, Vec2)]) -> Result<Projection, ContactError> {
    let mut best: Option<(f64, Projection)> = None;
    for (i, (a, b)) in segments.iter().enumerate() {
        let (p, t) = closest_point_on_segment(x, a, b);
        let d = (p - x).norm();
        if best.as_ref().is_some_and(|(bd, _)| d >= *bd) {
            continue;
        }
        let e = b - a;
        let normal = Vec2::new(e.y, -e.x) / e.norm();
        best = Some((
            d,
            Projection {
                point: p,
                normal,
                xi: t,
                gap: (x - a).dot(&normal),
                segment: Some(i),
            },
        ));
    }
    best.map(|b| b.1).ok_or(ContactError::EmptyTarget)
}

/// Closest point on a circle; the normal points away from the center.
pub fn project_to_circle(x: &Vec2, c: &RigidCircle) -> Result<Projection, ContactError> {
    let v = x - c.center;
    let r = v.norm();
    if r <= 1e-14 * c.radius.max(1.0) {
        return Err(ContactError::DegenerateProjection);
    }
    let normal = v / r;
    Ok(Projection {
        point: c.center + normal * c.radius,
        normal,
        xi: v.y.atan2(v.x),
        gap: r - c.radius,
        segment: None,
    })
}

/// Contact pressure `max(0, λ − ε g)`.
#[inline]
pub fn contact_pressure(gap: f64, eps: f64, lambda: f64) -> f64 {
    (lambda - eps * gap).max(0.0)
}

/// Traction acting on the slave, `p · n` with `n` the master normal.
pub fn contact_traction(gap: f64, normal: &Vec2, eps: f64, lambda: f64) -> Vec2 {
    normal * contact_pressure(gap, eps, lambda)
}

/// Multiplier address: slave segment, Gauss point, target.
pub type PointKey = (usize, usize, Target);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Flexible,
    Rigid(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiplierField {
    pub values: BTreeMap<PointKey, f64>,
    pub outer_iterations: usize,
}

impl MultiplierField {
    pub fn get(&self, key: &PointKey) -> f64 {
        self.values.get(key).copied().unwrap_or(0.0)
    }
}

/// `λ ← max(0, λ − ε g)` at every listed point.
pub fn uzawa_update(field: &MultiplierField, gaps: &[(PointKey, f64, f64)]) -> MultiplierField {
    let mut out = field.clone();
    for &(key, gap, eps) in gaps {
        let next = contact_pressure(gap, eps, field.get(&key));
        if next > 0.0 {
            out.values.insert(key, next);
        } else {
            out.values.remove(&key);
        }
    }
    out.outer_iterations += 1;
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSettings {
    /// penalty for mutual contact, N/mm³
    pub eps_mutual: f64,
    /// penalty for self contact, N/mm³
    pub eps_self: f64,
    pub search_radius: f64,
    /// gaps below `−max_depth` are treated as spurious and ignored
    pub max_depth: f64,
    pub thickness: f64,
    pub self_contact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PointContact {
    key: PointKey,
    slave: usize,
    shape: [f64; 2],
    master: Master,
    gap: f64,
    eps: f64,
    lambda: f64,
    weight: f64,
    position: Vec2,
    normal: Vec2,
}

impl PointContact {
    fn pressure(&self) -> f64 {
        contact_pressure(self.gap, self.eps, self.lambda)
    }
}

/// A contact point with positive pressure, for reports and drawings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSite {
    pub slave: usize,
    pub gauss_point: usize,
    pub master: Master,
    pub position: Vec2,
    pub gap: f64,
    pub pressure: f64,
}

type Dofs = [usize; 8];

/// Normal gap of `p` to the line of `c → d` and its derivatives with respect
/// to `(p_a, p_b, c, d)`, where `p = N₁ p_a + N₂ p_b`.
fn segment_gap(p: &Vec2, c: &Vec2, d: &Vec2, shape: [f64; 2]) -> (f64, [f64; 8], [[f64; 8]; 8]) {
    let dv = p - c;
    let e = d - c;
    let l = e.norm();
    let eh = e / l;
    let rot = |v: &Vec2| Vec2::new(v.y, -v.x);
    let rot_t = |v: &Vec2| Vec2::new(-v.y, v.x);
    let n = rot(&eh);
    let g = dv.dot(&n);
    let g_d = n;
    let rtd = rot_t(&dv);
    let g_e = (rtd - eh * g) / l;
    let r = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let proj = Matrix2::identity() - eh * eh.transpose();
    let h_de = r * proj / l;
    let h_ee = -(rtd * e.transpose() + e * rtd.transpose()) / (l * l * l) - (Matrix2::identity() - eh * eh.transpose() * 3.0) * (g / (l * l));
    // S_d = [N1 I, N2 I, −I, 0], S_e = [0, 0, −I, I]
    let sd = [shape[0], shape[1], -1.0, 0.0];
    let se = [0.0, 0.0, -1.0, 1.0];
    let mut grad = [0.0; 8];
    for k in 0..4 {
        let v = g_d * sd[k] + g_e * se[k];
        grad[2 * k] = v.x;
        grad[2 * k + 1] = v.y;
    }
    let mut hess = [[0.0; 8]; 8];
    for i in 0..4 {
        for j in 0..4 {
            let blk = h_de * (sd[i] * se[j]) + h_de.transpose() * (se[i] * sd[j]) + h_ee * (se[i] * se[j]);
            for a in 0..2 {
                for b in 0..2 {
                    hess[2 * i + a][2 * j + b] = blk[(a, b)];
                }
            }
        }
    }
    (g, grad, hess)
}

/// Contact of one flexible body with itself and with rigid circles.
#[derive(Debug, Clone)]
pub struct ContactModel {
    pub body: ContactBody,
    pub circles: Vec<RigidCircle>,
    pub settings: ContactSettings,
    reference: Vec<Vec2>,
    pub pairs: Vec<ContactPair>,
    pub multipliers: MultiplierField,
    saved: Option<(Vec<ContactPair>, MultiplierField)>,
}

impl ContactModel {
    pub fn new(body: ContactBody, circles: Vec<RigidCircle>, reference: Vec<Vec2>, settings: ContactSettings) -> Self {
        let mut m = ContactModel {
            body,
            circles,
            settings,
            reference,
            pairs: Vec::new(),
            multipliers: MultiplierField::default(),
            saved: None,
        };
        let x = m.reference.clone();
        m.detect(&x);
        m
    }

    fn detect(&mut self, x: &[Vec2]) -> bool {
        let mut pairs = detect_pairs(&self.body, &self.circles, x, self.settings.search_radius);
        if !self.settings.self_contact {
            pairs.retain(|p| p.mode == ContactMode::Mutual);
        }
        let changed = pairs.len() != self.pairs.len()
            || pairs.iter().zip(&self.pairs).any(|(a, b)| a.slave != b.slave || a.master != b.master);
        self.pairs = pairs;
        changed
    }

    fn slave_normal(&self, s: usize, x: &[Vec2]) -> Vec2 {
        let (a, b) = self.body.ends(s, x);
        let e = b - a;
        Vec2::new(e.y, -e.x) / e.norm()
    }

    fn dofs(&self, slave: usize, master: Master) -> Dofs {
        let s = &self.body.segments[slave];
        let (c, d) = match master {
            Master::Segment(m) => (self.body.segments[m].nodes[0], self.body.segments[m].nodes[1]),
            Master::Rigid(_) => (usize::MAX, usize::MAX),
        };
        let mut out = [usize::MAX; 8];
        for (k, n) in [s.nodes[0], s.nodes[1], c, d].into_iter().enumerate() {
            if n != usize::MAX {
                out[2 * k] = 2 * n;
                out[2 * k + 1] = 2 * n + 1;
            }
        }
        out
    }

    /// Evaluated contact points at configuration `x`. A point against a
    /// flexible master uses the nearest valid projection among its pairs.
    fn points(&self, x: &[Vec2]) -> Result<Vec<PointContact>, ContactError> {
        let st = &self.settings;
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.pairs.len() {
            let slave = self.pairs[i].slave;
            let mut j = i;
            while j < self.pairs.len() && self.pairs[j].slave == slave {
                j += 1;
            }
            let group = &self.pairs[i..j];
            i = j;
            let (a, b) = self.body.ends(slave, x);
            let (a0, b0) = self.body.ends(slave, &self.reference);
            let weight = st.thickness * (b0 - a0).norm() / 2.0;
            let ns = self.slave_normal(slave, x);
            for (q, xi) in GAUSS_XI.iter().enumerate() {
                let shape = [0.5 * (1.0 - xi), 0.5 * (1.0 + xi)];
                let p = a * shape[0] + b * shape[1];
                let p0 = a0 * shape[0] + b0 * shape[1];
                let mut flexible: Option<PointContact> = None;
                for pair in group {
                    match pair.master {
                        Master::Rigid(ci) => {
                            let proj = project_to_circle(&p, &self.circles[ci])?;
                            if proj.gap < -st.max_depth {
                                continue;
                            }
                            let key = (slave, q, Target::Rigid(ci));
                            out.push(PointContact {
                                key,
                                slave,
                                shape,
                                master: pair.master,
                                gap: proj.gap,
                                eps: st.eps_mutual,
                                lambda: self.multipliers.get(&key),
                                weight,
                                position: p,
                                normal: proj.normal,
                            });
                        }
                        Master::Segment(m) => {
                            let (c, d) = self.body.ends(m, x);
                            let e = d - c;
                            let l2 = e.norm_squared();
                            let eta = (p - c).dot(&e) / l2;
                            if !(0.0..=1.0).contains(&eta) {
                                continue;
                            }
                            let nm = Vec2::new(e.y, -e.x) / l2.sqrt();
                            if ns.dot(&nm) >= 0.0 {
                                continue;
                            }
                            let gap = (p - c).dot(&nm);
                            if gap < -st.max_depth || gap > st.search_radius {
                                continue;
                            }
                            // pairs that already overlap in the reference
                            // configuration are opposite faces of one member
                            let (c0, d0) = self.body.ends(m, &self.reference);
                            let e0 = d0 - c0;
                            let eta0 = (p0 - c0).dot(&e0) / e0.norm_squared();
                            if (0.0..=1.0).contains(&eta0) && (p0 - c0).dot(&Vec2::new(e0.y, -e0.x)) < 0.0 {
                                continue;
                            }
                            if flexible.as_ref().is_some_and(|f| gap.abs() >= f.gap.abs()) {
                                continue;
                            }
                            let key = (slave, q, Target::Flexible);
                            flexible = Some(PointContact {
                                key,
                                slave,
                                shape,
                                master: pair.master,
                                gap,
                                eps: st.eps_self,
                                lambda: self.multipliers.get(&key),
                                weight,
                                position: p,
                                normal: nm,
                            });
                        }
                    }
                }
                out.extend(flexible);
            }
        }
        Ok(out)
    }

    /// Gap gradient and Hessian of one point over its 8 local DOFs.
    fn kinematics(&self, pc: &PointContact, x: &[Vec2]) -> ([f64; 8], [[f64; 8]; 8]) {
        match pc.master {
            Master::Rigid(ci) => {
                let c = &self.circles[ci];
                let v = pc.position - c.center;
                let r = v.norm();
                let n = v / r;
                let h = (Matrix2::identity() - n * n.transpose()) / r;
                let mut grad = [0.0; 8];
                let mut hess = [[0.0; 8]; 8];
                for i in 0..2 {
                    grad[2 * i] = pc.shape[i] * n.x;
                    grad[2 * i + 1] = pc.shape[i] * n.y;
                    for j in 0..2 {
                        for a in 0..2 {
                            for b in 0..2 {
                                hess[2 * i + a][2 * j + b] = pc.shape[i] * pc.shape[j] * h[(a, b)];
                            }
                        }
                    }
                }
                (grad, hess)
            }
            Master::Segment(m) => {
                let (c, d) = self.body.ends(m, x);
                let (_, grad, hess) = segment_gap(&pc.position, &c, &d, pc.shape);
                (grad, hess)
            }
        }
    }

    /// Contact potential `Σ w φ(g)`.
    pub fn energy(&self, x: &[Vec2]) -> Result<f64, ContactError> {
        Ok(self
            .points(x)?
            .iter()
            .map(|pc| pc.weight * pc.pressure().powi(2) / (2.0 * pc.eps))
            .sum())
    }

    /// Gradient of the contact potential (resisting force), length `2·n_nodes`.
    pub fn contact_force(&self, x: &[Vec2]) -> Result<Vec<f64>, ContactError> {
        let mut r = vec![0.0; 2 * x.len()];
        self.add_force(x, &mut r)?;
        Ok(r)
    }

    fn add_force(&self, x: &[Vec2], r: &mut [f64]) -> Result<(), ContactError> {
        for pc in self.points(x)? {
            let p = pc.pressure();
            if p <= 0.0 {
                continue;
            }
            let (grad, _) = self.kinematics(&pc, x);
            for (k, dof) in self.dofs(pc.slave, pc.master).iter().enumerate() {
                if *dof != usize::MAX {
                    r[*dof] -= p * pc.weight * grad[k];
                }
            }
        }
        Ok(())
    }

    pub fn contact_stiffness(&self, x: &[Vec2]) -> Result<CooMatrix, ContactError> {
        let mut k = CooMatrix::new(2 * x.len());
        self.add_stiffness(x, &mut k)?;
        Ok(k)
    }

    fn add_stiffness(&self, x: &[Vec2], k: &mut CooMatrix) -> Result<(), ContactError> {
        for pc in self.points(x)? {
            let p = pc.pressure();
            if p <= 0.0 {
                continue;
            }
            let (grad, hess) = self.kinematics(&pc, x);
            let dofs = self.dofs(pc.slave, pc.master);
            for i in 0..8 {
                if dofs[i] == usize::MAX {
                    continue;
                }
                for j in 0..8 {
                    if dofs[j] == usize::MAX {
                        continue;
                    }
                    let v = pc.weight * (pc.eps * grad[i] * grad[j] - p * hess[i][j]);
                    if v != 0.0 {
                        k.push(dofs[i], dofs[j], v);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn active_sites(&self, x: &[Vec2]) -> Vec<ContactSite> {
        self.points(x)
            .unwrap_or_default()
            .into_iter()
            .filter(|pc| pc.pressure() > 0.0)
            .map(|pc| ContactSite {
                slave: pc.slave,
                gauss_point: pc.key.1,
                master: pc.master,
                position: pc.position,
                gap: pc.gap,
                pressure: pc.pressure(),
            })
            .collect()
    }

    /// Net force exerted on the body by the rigid circles, `Σ p w n`.
    pub fn rigid_resultant(&self, x: &[Vec2]) -> Vector2<f64> {
        self.points(x)
            .unwrap_or_default()
            .iter()
            .filter(|pc| matches!(pc.master, Master::Rigid(_)))
            .map(|pc| pc.normal * pc.pressure() * pc.weight)
            .sum()
    }

    pub fn pairs_with_activity(&self, x: &[Vec2]) -> Vec<ContactPair> {
        let sites = self.active_sites(x);
        self.pairs
            .iter()
            .map(|p| ContactPair {
                active: sites.iter().any(|s| s.slave == p.slave && s.master == p.master),
                ..*p
            })
            .collect()
    }
}

impl ContactHook for ContactModel {
    fn refresh(&mut self, x: &[Vec2]) -> bool {
        self.detect(x)
    }

    fn add_residual(&self, x: &[Vec2], r: &mut [f64]) -> Result<(), HookFailure> {
        self.add_force(x, r).map_err(|e| HookFailure(e.to_string()))
    }

    fn add_tangent(&self, x: &[Vec2], k: &mut CooMatrix) -> Result<(), HookFailure> {
        self.add_stiffness(x, k).map_err(|e| HookFailure(e.to_string()))
    }

    fn max_penetration(&self, x: &[Vec2]) -> f64 {
        self.points(x)
            .unwrap_or_default()
            .iter()
            .map(|pc| (-pc.gap).max(0.0))
            .fold(0.0, f64::max)
    }

    fn augment(&mut self, x: &[Vec2]) {
        let gaps: Vec<(PointKey, f64, f64)> = self
            .points(x)
            .unwrap_or_default()
            .iter()
            .map(|pc| (pc.key, pc.gap, pc.eps))
            .collect();
        self.multipliers = uzawa_update(&self.multipliers, &gaps);
    }

    fn checkpoint(&mut self) {
        self.saved = Some((self.pairs.clone(), self.multipliers.clone()));
    }

    fn rollback(&mut self) {
        if let Some((p, m)) = self.saved.clone() {
            self.pairs = p;
            self.multipliers = m;
        }
    }

    fn active_count(&self, x: &[Vec2]) -> usize {
        self.points(x)
            .unwrap_or_default()
            .iter()
            .filter(|pc| pc.pressure() > 0.0)
            .count()
    }
}
