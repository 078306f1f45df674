//! From a design vector to a scored candidate: material states, boundary
//! smoothing, feasibility, contact FEA and the shape objective.

use std::path::Path;

use thiserror::Error;

use crate::config::{Axis, ConfigError, Fix, NodeSelector, ProblemConfig, RegionKind};
use crate::contact::{ContactBody, ContactModel, ContactSettings, ContactSite, RigidCircle};
use crate::design::{
    assign_material_states, connected_ports_component, generate_rigid_surfaces, protect_smes, volume_fraction,
    DesignVector, MaskBounds, MaterialField, Port, RigidSurface, ShapeMorphingSet,
};
use crate::fem::{end_compliance, newton_solve, BoundaryConditions, FeModel, MaterialParams, NewtonConfig, SolverState};
use crate::geometry::Vec2;
use crate::hexmesh::{boundary_loops, HexMesh, LOCATE_TOL};
use crate::optimizer::{uniform_mask_grid, Candidate, Diagnostics, Evaluator, MutationConfig, OptimizerConfig, VolumePenalty};
use crate::shape_objective::{
    compute_fsd, fsd_errors, parse_curve, shape_invariants, weighted_error, CurvePolyline, FourierDescriptor, FsdErrors,
    ObjectiveWeights, ShapeInvariants, ZetaMode,
};
use crate::smoothing::{second_step_removal, smooth};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("`{key}` selects no mesh node")]
    EmptySelection { key: String },
    #[error("`{key}`: node {node} does not exist")]
    NoSuchNode { key: String, node: usize },
    #[error("`shape_morphing.select`: {0}")]
    ShapeMorphing(String),
    #[error("`shape_morphing.target`: {0}")]
    Target(String),
    #[error("initial design: {0}")]
    InitialDesign(String),
}

#[derive(Debug, Clone)]
pub struct Support {
    pub nodes: Vec<usize>,
    pub fix: Fix,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub smoothing_passes: usize,
    pub contact: ContactSettings,
    pub newton: NewtonConfig,
    pub harmonics: usize,
    pub weights: ObjectiveWeights,
    pub zeta_mode: ZetaMode,
    pub volume: VolumePenalty,
    pub circle_segments: usize,
}

/// A configuration resolved against its mesh.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: HexMesh,
    pub material: MaterialParams,
    pub supports: Vec<Support>,
    pub load_nodes: Vec<usize>,
    pub load_direction: Vec2,
    pub smes: ShapeMorphingSet,
    pub target: Vec<Vec2>,
    pub target_fsd: FourierDescriptor,
    pub forced: Vec<Option<bool>>,
    pub bounds: MaskBounds,
    pub force_limits: (f64, f64),
    pub ports: Vec<Port>,
    pub settings: Settings,
}

fn select_nodes(mesh: &HexMesh, sel: &NodeSelector, order: Option<Axis>, key: &str) -> Result<Vec<usize>, ProblemError> {
    let nodes = match sel {
        NodeSelector::Nodes(ids) => {
            if let Some(&bad) = ids.iter().find(|&&n| n >= mesh.nodes.len()) {
                return Err(ProblemError::NoSuchNode {
                    key: key.to_string(),
                    node: bad,
                });
            }
            ids.clone()
        }
        NodeSelector::Near(points) => points
            .iter()
            .map(|p| mesh.nearest_node(&Vec2::new(p[0], p[1])))
            .collect(),
        NodeSelector::Box(b) => {
            let mut ids: Vec<usize> = mesh
                .nodes
                .iter()
                .filter(|n| {
                    let p = n.position;
                    p.x >= b[0] - LOCATE_TOL && p.x <= b[2] + LOCATE_TOL && p.y >= b[1] - LOCATE_TOL && p.y <= b[3] + LOCATE_TOL
                })
                .map(|n| n.id)
                .collect();
            let axis = order.unwrap_or(if b[3] - b[1] > b[2] - b[0] { Axis::Y } else { Axis::X });
            let pos = |n: usize| mesh.nodes[n].position;
            ids.sort_by(|&i, &j| match axis {
                Axis::X => pos(i).x.total_cmp(&pos(j).x).then(pos(i).y.total_cmp(&pos(j).y)),
                Axis::Y => pos(i).y.total_cmp(&pos(j).y).then(pos(i).x.total_cmp(&pos(j).x)),
            });
            ids
        }
    };
    if nodes.is_empty() {
        return Err(ProblemError::EmptySelection { key: key.to_string() });
    }
    Ok(nodes)
}

fn node_port(mesh: &HexMesh, nodes: &[usize]) -> Port {
    let mut elements: Vec<usize> = nodes.iter().flat_map(|&n| mesh.node_elements(n).iter().copied()).collect();
    elements.sort_unstable();
    elements.dedup();
    Port { elements }
}

impl Problem {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self, ProblemError> {
        let d = &cfg.domain;
        let mesh = HexMesh::generate_grid(d.cols, d.rows, d.edge_length).map_err(|e| ConfigError::Invalid {
            key: "domain".into(),
            reason: e.to_string(),
        })?;
        let m = &cfg.material;
        let material = MaterialParams::new(m.youngs_modulus, m.poisson_ratio, m.thickness).map_err(|e| ConfigError::Invalid {
            key: "material".into(),
            reason: e.to_string(),
        })?;
        let supports = cfg
            .supports
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(Support {
                    nodes: select_nodes(&mesh, &s.select, None, &format!("supports[{i}].select"))?,
                    fix: s.fix,
                })
            })
            .collect::<Result<Vec<_>, ProblemError>>()?;
        let load_nodes = select_nodes(&mesh, &cfg.load.select, None, "load.select")?;
        let dir = Vec2::new(cfg.load.direction[0], cfg.load.direction[1]);
        let smn = select_nodes(&mesh, &cfg.shape_morphing.select, cfg.shape_morphing.order, "shape_morphing.select")?;
        let smes = ShapeMorphingSet::from_nodes(&mesh, smn).map_err(|e| ProblemError::ShapeMorphing(e.to_string()))?;
        let target_text = std::fs::read_to_string(cfg.target_path())
            .map_err(|e| ProblemError::Target(format!("{}: {e}", cfg.target_path().display())))?;
        let target = parse_curve(&target_text).map_err(|e| ProblemError::Target(e.to_string()))?;
        let target_fsd = compute_fsd(&CurvePolyline::open(target.clone()), cfg.fsd.harmonics)
            .map_err(|e| ProblemError::Target(e.to_string()))?;

        let mut forced = vec![None; mesh.elements.len()];
        for r in &cfg.regions {
            for (e, slot) in forced.iter_mut().enumerate() {
                let c = mesh.centroid(e);
                if c.x >= r.rect[0] && c.x <= r.rect[2] && c.y >= r.rect[1] && c.y <= r.rect[3] {
                    *slot = Some(r.kind == RegionKind::Solid);
                }
            }
        }
        let mut ports: Vec<Port> = supports.iter().map(|s| node_port(&mesh, &s.nodes)).collect();
        ports.push(node_port(&mesh, &load_nodes));
        ports.extend(smes.element_ids.iter().map(|&e| Port::single(e)));

        let settings = Settings {
            smoothing_passes: cfg.solver.smoothing_passes,
            contact: ContactSettings {
                eps_mutual: cfg.eps_mutual(),
                eps_self: cfg.eps_self(),
                search_radius: cfg.search_radius(),
                max_depth: cfg.max_depth(),
                thickness: m.thickness,
                self_contact: cfg.contact.self_contact,
            },
            newton: NewtonConfig {
                load_steps: cfg.solver.load_steps,
                max_iterations: cfg.solver.max_iterations,
                max_outer: cfg.solver.max_outer,
                gap_tol: cfg.gap_tol(),
                ..NewtonConfig::default()
            },
            harmonics: cfg.fsd.harmonics,
            weights: cfg.fsd.weights,
            zeta_mode: cfg.fsd.zeta_mode,
            volume: cfg.optimizer.volume,
            circle_segments: cfg.masks.circle_segments,
        };
        let bounds = MaskBounds::for_mesh(&mesh, cfg.masks.r_min, cfg.masks.r_max);
        Ok(Problem {
            mesh,
            material,
            supports,
            load_nodes,
            load_direction: dir.normalize(),
            smes,
            target,
            target_fsd,
            forced,
            bounds,
            force_limits: (cfg.load.limits[0], cfg.load.limits[1]),
            ports,
            settings,
        })
    }

    pub fn optimizer_config(&self, cfg: &ProblemConfig) -> OptimizerConfig {
        OptimizerConfig {
            mutation: MutationConfig {
                pr: cfg.optimizer.pr,
                step: cfg.mutation_step(),
                force_step: cfg.force_step(),
                bounds: self.bounds,
                force_limits: self.force_limits,
                contact_surfaces: cfg.masks.contact_surfaces,
            },
            max_iters: cfg.optimizer.max_iters,
            delta_f: cfg.optimizer.delta_f,
            stall_window: cfg.optimizer.stall_window,
            seed: cfg.seed,
        }
    }

    /// The configured initial design file, or the uniform mask layout.
    pub fn initial_design(&self, cfg: &ProblemConfig) -> Result<DesignVector, ProblemError> {
        if let Some(p) = &cfg.optimizer.initial_design {
            let path = cfg.resolve(p);
            return load_design(&path);
        }
        let (lo, hi) = self.mesh.bounding_box();
        Ok(uniform_mask_grid(
            (lo.x, lo.y),
            (hi.x, hi.y),
            cfg.masks.grid[0],
            cfg.masks.grid[1],
            cfg.initial_radius(),
            cfg.masks.initial_fraction,
            cfg.initial_force(),
        ))
    }

    fn enforce(&self, field: &mut MaterialField) {
        for (e, f) in self.forced.iter().enumerate() {
            if let Some(solid) = f {
                field.rho[e] = *solid;
            }
        }
        for &e in &self.smes.element_ids {
            field.rho[e] = true;
        }
    }
}

pub fn load_design(path: &Path) -> Result<DesignVector, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|e| ProblemError::InitialDesign(format!("{}: {e}", path.display())))?;
    DesignVector::from_text(&text).map_err(|e| ProblemError::InitialDesign(e.to_string()))
}

/// Everything computed for one design; `None` fields were not reached.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub candidate: Candidate,
    pub material: MaterialField,
    /// smoothed reference positions of all mesh nodes
    pub reference: Option<Vec<Vec2>>,
    pub loops: Vec<Vec<usize>>,
    pub surfaces: Vec<RigidSurface>,
    pub solver: Option<SolverState>,
    pub f_ext: Vec<f64>,
    pub sites: Vec<ContactSite>,
    pub actual_curve: Option<Vec<Vec2>>,
    pub actual_fsd: Option<FourierDescriptor>,
    pub errors: Option<FsdErrors>,
    pub invariants: Option<ShapeInvariants>,
    pub end_compliance: Option<f64>,
}

impl Analysis {
    pub fn deformed(&self) -> Option<Vec<Vec2>> {
        let x = self.reference.as_ref()?;
        let u = &self.solver.as_ref()?.u;
        Some(x.iter().enumerate().map(|(i, p)| p + Vec2::new(u[2 * i], u[2 * i + 1])).collect())
    }
}

/// Run the full analysis chain on `design`. Failures are recorded in the
/// returned candidate, which then carries the penalty objective.
pub fn analyze(problem: &Problem, design: &DesignVector, keep_steps: bool) -> Analysis {
    let mesh = &problem.mesh;
    let (masks, _) = protect_smes(&design.masks, &problem.smes, mesh, &problem.bounds);
    let design = DesignVector {
        masks,
        input_force: design.input_force,
    };
    let mut material = assign_material_states(mesh, &design.masks);
    problem.enforce(&mut material);
    let mut out = Analysis {
        candidate: Candidate::penalized(design.clone(), volume_fraction(&material), ""),
        material: material.clone(),
        reference: None,
        loops: Vec::new(),
        surfaces: Vec::new(),
        solver: None,
        f_ext: Vec::new(),
        sites: Vec::new(),
        actual_curve: None,
        actual_fsd: None,
        errors: None,
        invariants: None,
        end_compliance: None,
    };
    let fail = |mut out: Analysis, reason: String| {
        log::debug!("candidate penalized: {reason}");
        out.candidate.volume_fraction = volume_fraction(&out.material);
        out.candidate.diagnostics.failure = Some(reason);
        out
    };
    let base = mesh.positions();
    let passes = problem.settings.smoothing_passes;

    // first removal and smoothing, then the second removal step
    let first = match smooth(&base, &mesh.boundary_edges(&material), passes) {
        Ok(s) => s,
        Err(e) => return fail(out, format!("first smoothing: {e}")),
    };
    let mut material = second_step_removal(&material, &design.masks, mesh, &first);
    problem.enforce(&mut material);
    let Some(component) = connected_ports_component(&material, mesh, &problem.ports) else {
        out.material = material;
        return fail(out, "ports are not connected through solid material".into());
    };
    material.rho = component;
    out.material = material.clone();

    // regular cells restored, then the final smoothing
    let edges = mesh.boundary_edges(&material);
    let second = match smooth(&base, &edges, passes) {
        Ok(s) => s,
        Err(e) => return fail(out, format!("final smoothing: {e}")),
    };
    let reference = second.apply(&base);
    let loops = match boundary_loops(&edges) {
        Ok(l) => l,
        Err(e) => return fail(out, format!("boundary loops: {e}")),
    };
    out.reference = Some(reference.clone());
    out.loops = loops.clone();

    let polys: Vec<Vec<usize>> = material.solid_elements().map(|e| mesh.elements[e].node_ids.to_vec()).collect();
    let model = match FeModel::new(&reference, &polys, problem.material) {
        Ok(m) => m,
        Err(e) => return fail(out, format!("element setup: {e}")),
    };
    let active = model.active_nodes();

    let surfaces = generate_rigid_surfaces(&design.masks, problem.settings.circle_segments);
    out.surfaces = surfaces.clone();
    let circles: Vec<RigidCircle> = surfaces
        .iter()
        .map(|s| RigidCircle {
            center: s.center,
            radius: s.radius,
        })
        .collect();
    for c in &circles {
        let overlaps = reference
            .iter()
            .enumerate()
            .any(|(i, p)| active[i] && (p - c.center).norm() <= c.radius);
        let inside = mesh.locate_point(&c.center).is_some_and(|e| material.is_solid(e));
        if overlaps || inside {
            return fail(out, "a rigid contact surface overlaps the body".into());
        }
    }

    let n_dofs = model.n_dofs();
    let mut bcs = BoundaryConditions::new(n_dofs);
    for s in &problem.supports {
        for &n in s.nodes.iter().filter(|&&n| active[n]) {
            if matches!(s.fix, Fix::Xy | Fix::X) {
                bcs.prescribed.push((2 * n, 0.0));
            }
            if matches!(s.fix, Fix::Xy | Fix::Y) {
                bcs.prescribed.push((2 * n + 1, 0.0));
            }
        }
    }
    let loaded: Vec<usize> = problem.load_nodes.iter().copied().filter(|&n| active[n]).collect();
    if bcs.prescribed.is_empty() || loaded.is_empty() {
        return fail(out, "supports or load nodes are not attached to solid material".into());
    }
    let per_node = problem.load_direction * (design.input_force / loaded.len() as f64);
    for &n in &loaded {
        bcs.f_ext[2 * n] += per_node.x;
        bcs.f_ext[2 * n + 1] += per_node.y;
    }
    out.f_ext = bcs.f_ext.clone();

    let mut contact = ContactModel::new(ContactBody::from_loops(&loops), circles, reference.clone(), problem.settings.contact);
    let newton = NewtonConfig {
        keep_steps,
        ..problem.settings.newton.clone()
    };
    let state = match newton_solve(&model, &reference, &bcs, &mut contact, &newton) {
        Ok(s) => s,
        Err(e) => return fail(out, format!("solver setup: {e}")),
    };
    let diagnostics = Diagnostics {
        newton_iterations: state.newton_iterations,
        outer_iterations: state.outer_iterations,
        active_contacts: state.steps.last().map_or(0, |s| s.active_contacts),
        failure: state.failure.clone(),
    };
    out.candidate.diagnostics = diagnostics;
    let converged = state.converged;
    let u = state.u.clone();
    out.solver = Some(state);
    if !converged {
        let reason = out.candidate.diagnostics.failure.clone().unwrap_or_default();
        return fail(out, format!("no equilibrium: {reason}"));
    }
    let x: Vec<Vec2> = reference
        .iter()
        .enumerate()
        .map(|(i, p)| p + Vec2::new(u[2 * i], u[2 * i + 1]))
        .collect();
    out.sites = contact.active_sites(&x);
    out.end_compliance = Some(end_compliance(&bcs.f_ext, &u));

    let curve: Vec<Vec2> = problem.smes.node_ids.iter().map(|&n| x[n]).collect();
    out.actual_curve = Some(curve.clone());
    let fsd = match compute_fsd(&CurvePolyline::open(curve), problem.settings.harmonics) {
        Ok(f) => f,
        Err(e) => return fail(out, format!("deformed curve: {e}")),
    };
    let errors = match fsd_errors(&problem.target_fsd, &fsd) {
        Ok(e) => e,
        Err(e) => return fail(out, format!("descriptor comparison: {e}")),
    };
    out.invariants = shape_invariants(&problem.target_fsd, &fsd, problem.settings.zeta_mode).ok();
    out.actual_fsd = Some(fsd);
    out.errors = Some(errors);
    let f0 = weighted_error(&errors, &problem.settings.weights);
    let v = volume_fraction(&material);
    out.candidate.shape_objective = Some(f0);
    out.candidate.objective = problem.settings.volume.apply(f0, v);
    out.candidate.feasible = true;
    out.candidate.volume_fraction = v;
    out
}

/// Evaluator over a resolved problem.
pub struct ProblemEvaluator<'a> {
    pub problem: &'a Problem,
}

impl Evaluator for ProblemEvaluator<'_> {
    fn evaluate(&mut self, design: &DesignVector) -> Candidate {
        analyze(self.problem, design, false).candidate
    }
}
