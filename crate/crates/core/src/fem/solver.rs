//! Newton–Raphson equilibrium with adaptive load stepping and an outer
//! multiplier loop for contact.
//!
//! The residual is `R(u) = f_int(u) + ∂Π_c/∂u − λ f_ext`, where `Π_c` is the
//! contact potential supplied by a [`ContactHook`]. Prescribed DOFs follow
//! the load factor as well.

use thiserror::Error;

use super::model::{ElementError, FeModel};
use super::sparse::{solve_reduced, CooMatrix};
use crate::geometry::Vec2;

/// Failure reported by a contact hook during assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct HookFailure(pub String);

/// Contact contributions to the residual and the tangent.
///
/// Positions passed in are current nodal coordinates `X + u` for every mesh
/// node; vectors and matrices are indexed by global DOF `2·node + dim`.
pub trait ContactHook {
    /// Re-run pair detection at `x`. Returns true when the pair set changed.
    fn refresh(&mut self, x: &[Vec2]) -> bool;
    fn add_residual(&self, x: &[Vec2], r: &mut [f64]) -> Result<(), HookFailure>;
    fn add_tangent(&self, x: &[Vec2], k: &mut CooMatrix) -> Result<(), HookFailure>;
    /// Largest penetration depth (≥ 0) over all contact points.
    fn max_penetration(&self, x: &[Vec2]) -> f64;
    /// One multiplier update at the current configuration.
    fn augment(&mut self, x: &[Vec2]);
    fn checkpoint(&mut self);
    fn rollback(&mut self);
    fn active_count(&self, x: &[Vec2]) -> usize;
}

/// Hook for contact-free analyses.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoContact;

impl ContactHook for NoContact {
    fn refresh(&mut self, _: &[Vec2]) -> bool {
        false
    }
    fn add_residual(&self, _: &[Vec2], _: &mut [f64]) -> Result<(), HookFailure> {
        Ok(())
    }
    fn add_tangent(&self, _: &[Vec2], _: &mut CooMatrix) -> Result<(), HookFailure> {
        Ok(())
    }
    fn max_penetration(&self, _: &[Vec2]) -> f64 {
        0.0
    }
    fn augment(&mut self, _: &[Vec2]) {}
    fn checkpoint(&mut self) {}
    fn rollback(&mut self) {}
    fn active_count(&self, _: &[Vec2]) -> usize {
        0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    /// `(dof, total prescribed value)`; zero for supports.
    pub prescribed: Vec<(usize, f64)>,
    /// External nodal force vector at load factor 1.
    pub f_ext: Vec<f64>,
}

impl BoundaryConditions {
    pub fn new(n_dofs: usize) -> Self {
        BoundaryConditions {
            prescribed: Vec::new(),
            f_ext: vec![0.0; n_dofs],
        }
    }

    pub fn fix_node(&mut self, node: usize) {
        self.prescribed.push((2 * node, 0.0));
        self.prescribed.push((2 * node + 1, 0.0));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub load_steps: usize,
    pub min_step: f64,
    pub grow_after: usize,
    pub max_iterations: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_outer: usize,
    /// Penetration tolerance for the multiplier loop, mm.
    pub gap_tol: f64,
    /// Keep the displacement field of every converged load step.
    pub keep_steps: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            load_steps: 10,
            min_step: 1.0 / 256.0,
            grow_after: 3,
            max_iterations: 25,
            tol_abs: 1e-10,
            tol_rel: 1e-6,
            max_outer: 10,
            gap_tol: 1e-4,
            keep_steps: false,
        }
    }
}

impl NewtonConfig {
    /// Defaults with the penetration tolerance scaled to edge length `a`.
    pub fn for_edge_length(a: f64) -> Self {
        NewtonConfig {
            gap_tol: 1e-4 * a,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonRecord {
    pub step: usize,
    pub load_factor: f64,
    pub outer: usize,
    pub iteration: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub load_factor: f64,
    pub newton_iterations: usize,
    pub outer_iterations: usize,
    pub max_penetration: f64,
    pub active_contacts: usize,
    pub u: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub load_factor: f64,
    pub converged: bool,
    pub newton_iterations: usize,
    pub outer_iterations: usize,
    /// A load step ended its multiplier loop above the penetration tolerance.
    pub outer_exhausted: bool,
    pub history: Vec<NewtonRecord>,
    pub steps: Vec<StepRecord>,
    pub failure: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("no supports: at least one prescribed DOF is required")]
    NoSupport,
    #[error("dimension mismatch: expected {expected} DOFs, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("prescribed DOF {0} out of range")]
    DofOutOfRange(usize),
}

struct Step {
    iterations: usize,
    outer: usize,
    exhausted: bool,
}

struct Solver<'a> {
    model: &'a FeModel,
    reference: &'a [Vec2],
    bcs: &'a BoundaryConditions,
    cfg: &'a NewtonConfig,
    map: Vec<Option<usize>>,
    n_free: usize,
    fixed: Vec<bool>,
    f_ext_norm: f64,
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

impl<'a> Solver<'a> {
    fn positions(&self, u: &[f64]) -> Vec<Vec2> {
        self.reference
            .iter()
            .enumerate()
            .map(|(i, p)| p + Vec2::new(u[2 * i], u[2 * i + 1]))
            .collect()
    }

    fn residual(&self, u: &[f64], lam: f64, hook: &dyn ContactHook) -> Result<Vec<f64>, String> {
        let mut r = self.model.internal_force(u).map_err(|e: ElementError| e.to_string())?;
        hook.add_residual(&self.positions(u), &mut r).map_err(|e| e.0)?;
        for (ri, fi) in r.iter_mut().zip(&self.bcs.f_ext) {
            *ri -= lam * fi;
        }
        Ok(r)
    }

    fn newton(
        &self,
        u: &mut [f64],
        lam: f64,
        hook: &dyn ContactHook,
        history: &mut Vec<NewtonRecord>,
        step: usize,
        outer: usize,
    ) -> Result<usize, String> {
        for &(d, v) in &self.bcs.prescribed {
            u[d] = lam * v;
        }
        for it in 1..=self.cfg.max_iterations {
            let r = self.residual(u, lam, hook)?;
            let free = norm((0..r.len()).filter(|&d| self.map[d].is_some()).map(|d| r[d]));
            let reaction = norm((0..r.len()).filter(|&d| self.fixed[d]).map(|d| r[d]));
            history.push(NewtonRecord {
                step,
                load_factor: lam,
                outer,
                iteration: it,
                residual_norm: free,
            });
            if !free.is_finite() {
                return Err("non-finite residual".into());
            }
            let f_ref = (lam * self.f_ext_norm).max(reaction);
            if free <= self.cfg.tol_abs + self.cfg.tol_rel * f_ref {
                return Ok(it);
            }
            if it == self.cfg.max_iterations {
                break;
            }
            let mut k = self.model.tangent_stiffness(u).map_err(|e| e.to_string())?;
            hook.add_tangent(&self.positions(u), &mut k).map_err(|e| e.0)?;
            let mut rhs = vec![0.0; self.n_free];
            for (d, m) in self.map.iter().enumerate() {
                if let Some(row) = m {
                    rhs[*row] = -r[d];
                }
            }
            let du = solve_reduced(&k, &self.map, self.n_free, &rhs).map_err(|e| e.to_string())?;
            for (d, m) in self.map.iter().enumerate() {
                if let Some(row) = m {
                    u[d] += du[*row];
                }
            }
        }
        Err(format!("Newton did not converge in {} iterations", self.cfg.max_iterations))
    }

    /// Equilibrium at load factor `lam`, with multiplier updates until the
    /// penetration tolerance is met.
    fn load_step(
        &self,
        u: &mut [f64],
        lam: f64,
        hook: &mut dyn ContactHook,
        history: &mut Vec<NewtonRecord>,
        step: usize,
    ) -> Result<Step, String> {
        let mut iterations = 0;
        let max_outer = self.cfg.max_outer.max(1);
        for outer in 1..=max_outer {
            iterations += self.newton(u, lam, hook, history, step, outer)?;
            let x = self.positions(u);
            let changed = hook.refresh(&x);
            let pen = hook.max_penetration(&x);
            if pen <= self.cfg.gap_tol && !changed {
                return Ok(Step {
                    iterations,
                    outer,
                    exhausted: false,
                });
            }
            if outer == max_outer {
                return Ok(Step {
                    iterations,
                    outer,
                    exhausted: pen > self.cfg.gap_tol,
                });
            }
            if pen > self.cfg.gap_tol {
                hook.augment(&x);
            }
        }
        unreachable!()
    }
}

/// Solve for equilibrium at full load starting from `u = 0`.
pub fn newton_solve(
    model: &FeModel,
    reference: &[Vec2],
    bcs: &BoundaryConditions,
    hook: &mut dyn ContactHook,
    cfg: &NewtonConfig,
) -> Result<SolverState, SolverError> {
    let n = model.n_dofs();
    if reference.len() * 2 != n {
        return Err(SolverError::Dimension {
            expected: n,
            got: reference.len() * 2,
        });
    }
    if bcs.f_ext.len() != n {
        return Err(SolverError::Dimension {
            expected: n,
            got: bcs.f_ext.len(),
        });
    }
    if bcs.prescribed.is_empty() {
        return Err(SolverError::NoSupport);
    }
    let mut fixed = vec![false; n];
    for &(d, _) in &bcs.prescribed {
        if d >= n {
            return Err(SolverError::DofOutOfRange(d));
        }
        fixed[d] = true;
    }
    let active = model.active_nodes();
    let mut map = vec![None; n];
    let mut n_free = 0;
    for d in 0..n {
        if active[d / 2] && !fixed[d] {
            map[d] = Some(n_free);
            n_free += 1;
        }
    }
    let solver = Solver {
        model,
        reference,
        bcs,
        cfg,
        map,
        n_free,
        fixed,
        f_ext_norm: norm(bcs.f_ext.iter().copied()),
    };

    let mut state = SolverState {
        u: vec![0.0; n],
        load_factor: 0.0,
        converged: false,
        newton_iterations: 0,
        outer_iterations: 0,
        outer_exhausted: false,
        history: Vec::new(),
        steps: Vec::new(),
        failure: None,
    };
    let unloaded = solver.f_ext_norm == 0.0 && bcs.prescribed.iter().all(|&(_, v)| v == 0.0);
    let base = if unloaded { 1.0 } else { 1.0 / cfg.load_steps.max(1) as f64 };
    let mut dl = base;
    let mut streak = 0;
    let mut step = 0;
    hook.refresh(&solver.positions(&state.u));
    while state.load_factor < 1.0 {
        let target = if 1.0 - state.load_factor - dl < 1e-12 {
            1.0
        } else {
            state.load_factor + dl
        };
        let saved = state.u.clone();
        hook.checkpoint();
        step += 1;
        match solver.load_step(&mut state.u, target, hook, &mut state.history, step) {
            Ok(s) => {
                state.load_factor = target;
                state.newton_iterations += s.iterations;
                state.outer_iterations += s.outer;
                state.outer_exhausted |= s.exhausted;
                let x = solver.positions(&state.u);
                state.steps.push(StepRecord {
                    load_factor: target,
                    newton_iterations: s.iterations,
                    outer_iterations: s.outer,
                    max_penetration: hook.max_penetration(&x),
                    active_contacts: hook.active_count(&x),
                    u: cfg.keep_steps.then(|| state.u.clone()),
                });
                streak += 1;
                if streak >= cfg.grow_after {
                    dl = (2.0 * dl).min(base);
                    streak = 0;
                }
            }
            Err(reason) => {
                state.u = saved;
                hook.rollback();
                streak = 0;
                dl *= 0.5;
                log::debug!("load step to {target} failed: {reason}; increment now {dl}");
                if dl < cfg.min_step * (1.0 - 1e-12) {
                    state.failure =
                        Some(format!("load increment fell below {} at load factor {}: {reason}", cfg.min_step, state.load_factor));
                    return Ok(state);
                }
            }
        }
    }
    state.converged = true;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::material::MaterialParams;
    use crate::hexmesh::HexMesh;

    fn strip(cols: usize, rows: usize) -> (HexMesh, FeModel) {
        let mesh = HexMesh::generate_grid(cols, rows, 1.0).unwrap();
        let polys: Vec<Vec<usize>> = mesh.elements.iter().map(|e| e.node_ids.to_vec()).collect();
        let model = FeModel::new(&mesh.positions(), &polys, MaterialParams::new(2100.0, 0.33, 1.0).unwrap()).unwrap();
        (mesh, model)
    }

    #[test]
    fn zero_load_single_iteration() {
        let (mesh, model) = strip(2, 2);
        let mut bcs = BoundaryConditions::new(model.n_dofs());
        bcs.fix_node(0);
        let s = newton_solve(&model, &mesh.positions(), &bcs, &mut NoContact, &NewtonConfig::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.newton_iterations, 1);
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_support_rejected() {
        let (mesh, model) = strip(1, 1);
        let bcs = BoundaryConditions::new(model.n_dofs());
        assert_eq!(
            newton_solve(&model, &mesh.positions(), &bcs, &mut NoContact, &NewtonConfig::default()),
            Err(SolverError::NoSupport)
        );
    }

    #[test]
    fn prescribed_values_reached() {
        let (mesh, model) = strip(3, 2);
        let pos = mesh.positions();
        let mut bcs = BoundaryConditions::new(model.n_dofs());
        let xmax = pos.iter().map(|p| p.x).fold(f64::MIN, f64::max);
        for (i, p) in pos.iter().enumerate() {
            if p.x < 1e-9 {
                bcs.fix_node(i);
            } else if (p.x - xmax).abs() < 1e-9 {
                bcs.prescribed.push((2 * i, 0.2));
            }
        }
        let s = newton_solve(&model, &pos, &bcs, &mut NoContact, &NewtonConfig::default()).unwrap();
        assert!(s.converged, "{:?}", s.failure);
        for &(d, v) in &bcs.prescribed {
            assert_eq!(s.u[d], v);
        }
        assert_eq!(s.steps.len(), 10);
    }
}
