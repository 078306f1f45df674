//! Stochastic hill climber over mask layouts and the input force.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{DesignVector, Mask, MaskBounds};

/// Objective assigned to infeasible or failed candidates.
pub const PENALTY: f64 = 1e6;

/// Step used for the fraction variable `f`, whose range is the unit interval.
const FRACTION_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumePenalty {
    /// target volume fraction V*
    pub target: f64,
    /// λ_v applied while V > V*
    pub weight: f64,
}

impl Default for VolumePenalty {
    fn default() -> Self {
        VolumePenalty {
            target: 0.3,
            weight: 20.0,
        }
    }
}

impl VolumePenalty {
    pub fn apply(&self, f0: f64, volume: f64) -> f64 {
        if volume > self.target {
            f0 + self.weight * (volume - self.target)
        } else {
            f0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationConfig {
    /// per-variable mutation probability
    pub pr: f64,
    /// largest step for positions and radii, mm
    pub step: f64,
    /// largest step for the force, N
    pub force_step: f64,
    pub bounds: MaskBounds,
    pub force_limits: (f64, f64),
    /// when false the binary variables stay at 0
    pub contact_surfaces: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub mutation: MutationConfig,
    pub max_iters: usize,
    /// stall tolerance Δf
    pub delta_f: f64,
    /// iterations over which the incumbent must improve by Δf; 0 disables
    pub stall_window: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub newton_iterations: usize,
    pub outer_iterations: usize,
    pub active_contacts: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// the design actually analysed (after any repair such as SME protection)
    pub design: DesignVector,
    /// penalized objective used for acceptance
    pub objective: f64,
    /// shape objective before the volume term; `None` if not evaluated
    pub shape_objective: Option<f64>,
    pub feasible: bool,
    pub volume_fraction: f64,
    pub diagnostics: Diagnostics,
}

impl Candidate {
    pub fn penalized(design: DesignVector, volume_fraction: f64, reason: impl Into<String>) -> Self {
        Candidate {
            design,
            objective: PENALTY,
            shape_objective: None,
            feasible: false,
            volume_fraction,
            diagnostics: Diagnostics {
                failure: Some(reason.into()),
                ..Default::default()
            },
        }
    }
}

/// Scores a design. Implementations must be deterministic.
pub trait Evaluator {
    fn evaluate(&mut self, design: &DesignVector) -> Candidate;
}

impl<F: FnMut(&DesignVector) -> Candidate> Evaluator for F {
    fn evaluate(&mut self, design: &DesignVector) -> Candidate {
        self(design)
    }
}

fn perturb(value: f64, scale: f64, rng: &mut ChaCha8Rng) -> f64 {
    let kappa: f64 = rng.gen();
    let up: bool = rng.gen();
    if up {
        value + kappa * scale
    } else {
        value - kappa * scale
    }
}

/// Independent per-variable mutation `d ± κ m`, then clamping to bounds.
pub fn mutate(design: &DesignVector, cfg: &MutationConfig, rng: &mut ChaCha8Rng) -> DesignVector {
    let mut out = design.clone();
    for m in out.masks.iter_mut() {
        if rng.gen::<f64>() < cfg.pr {
            m.x = perturb(m.x, cfg.step, rng);
        }
        if rng.gen::<f64>() < cfg.pr {
            m.y = perturb(m.y, cfg.step, rng);
        }
        if rng.gen::<f64>() < cfg.pr {
            m.r = perturb(m.r, cfg.step, rng);
        }
        if rng.gen::<f64>() < cfg.pr {
            let kappa: f64 = rng.gen();
            m.s = cfg.contact_surfaces && kappa < 0.5;
        }
        if rng.gen::<f64>() < cfg.pr {
            m.f = perturb(m.f, FRACTION_STEP, rng);
        }
        cfg.bounds.clamp(m);
    }
    if rng.gen::<f64>() < cfg.pr {
        out.input_force = perturb(out.input_force, cfg.force_step, rng);
    }
    out.input_force = out.input_force.clamp(cfg.force_limits.0, cfg.force_limits.1);
    out
}

/// `nx × ny` masks spread evenly over `[lo, hi]` with radius `r`, fraction
/// `f` and no contact surfaces.
pub fn uniform_mask_grid(lo: (f64, f64), hi: (f64, f64), nx: usize, ny: usize, r: f64, f: f64, force: f64) -> DesignVector {
    let mut masks = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            masks.push(Mask {
                x: lo.0 + (hi.0 - lo.0) * (i as f64 + 0.5) / nx as f64,
                y: lo.1 + (hi.1 - lo.1) * (j as f64 + 0.5) / ny as f64,
                r,
                s: false,
                f,
            });
        }
    }
    DesignVector {
        masks,
        input_force: force,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub f_incumbent: f64,
    pub f_candidate: f64,
    pub accepted: bool,
    pub volume_fraction: f64,
    pub newton_iters: usize,
    pub contact_pairs_active: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: Candidate,
    pub initial: Candidate,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
}

pub const CSV_HEADER: &str = "iter,f_incumbent,f_candidate,accepted,volume_fraction,newton_iters,contact_pairs_active";

/// Iteration log, one row per evaluated candidate (row 0 is the initial design).
pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in history {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{},{:e},{},{}",
            r.iter,
            r.f_incumbent,
            r.f_candidate,
            u8::from(r.accepted),
            r.volume_fraction,
            r.newton_iters,
            r.contact_pairs_active
        );
    }
    s
}

fn record(iter: usize, incumbent: f64, c: &Candidate, accepted: bool) -> IterationRecord {
    IterationRecord {
        iter,
        f_incumbent: incumbent,
        f_candidate: c.objective,
        accepted,
        volume_fraction: c.volume_fraction,
        newton_iters: c.diagnostics.newton_iterations,
        contact_pairs_active: c.diagnostics.active_contacts,
    }
}

/// Hill climbing from `initial`. `observer` sees every iteration together
/// with the incumbent after the acceptance decision.
pub fn run(
    evaluator: &mut dyn Evaluator,
    initial: &DesignVector,
    cfg: &OptimizerConfig,
    observer: &mut dyn FnMut(&IterationRecord, &Candidate),
) -> RunResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let first = evaluator.evaluate(initial);
    let mut best = first.clone();
    let mut history = vec![record(0, best.objective, &best, true)];
    observer(&history[0], &best);
    let mut termination = Termination::MaxIterations;
    for k in 1..=cfg.max_iters {
        let trial = mutate(&best.design, &cfg.mutation, &mut rng);
        let cand = evaluator.evaluate(&trial);
        let accepted = cand.objective < best.objective;
        if accepted {
            best = cand.clone();
        }
        history.push(record(k, best.objective, &cand, accepted));
        observer(&history[k], &best);
        let w = cfg.stall_window;
        if w > 0 && k >= w && history[k - w].f_incumbent - history[k].f_incumbent < cfg.delta_f {
            termination = Termination::Stalled;
            break;
        }
    }
    RunResult {
        best,
        initial: first,
        history,
        termination,
    }
}
