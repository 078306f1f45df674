//! Run orchestration and the files a run leaves behind.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::ProblemConfig;
use crate::contact::Master;
use crate::design::{DesignVector, MaterialField};
use crate::optimizer::{self, history_csv, IterationRecord, RunResult, Termination};
use crate::pipeline::{analyze, load_design, Analysis, Problem, ProblemError, ProblemEvaluator};
use crate::shape_objective::format_curve;
use crate::svg;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: io::Error },
}

/// Write-then-rename so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), SynthesisError> {
    let wrap = |source| SynthesisError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(wrap)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(wrap)?;
    fs::rename(&tmp, path).map_err(wrap)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// SVG snapshot of the incumbent every K iterations; 0 turns frames off
    pub frames_every: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub result: RunResult,
    pub final_analysis: Analysis,
    pub warnings: Vec<String>,
}

pub fn material_text(m: &MaterialField) -> String {
    let mut s = String::from("# element rho\n");
    for (e, &solid) in m.rho.iter().enumerate() {
        let _ = writeln!(s, "{e} {}", u8::from(solid));
    }
    s
}

pub fn contact_report(a: &Analysis) -> String {
    let mut s = String::from("# slave_segment gauss_point master x y gap pressure\n");
    for c in &a.sites {
        let master = match c.master {
            Master::Segment(m) => format!("segment:{m}"),
            Master::Rigid(i) => format!("rigid:{i}"),
        };
        let _ = writeln!(
            s,
            "{} {} {master} {:.9e} {:.9e} {:.9e} {:.9e}",
            c.slave, c.gauss_point, c.position.x, c.position.y, c.gap, c.pressure
        );
    }
    if let Some(st) = &a.solver {
        let _ = writeln!(s, "# uzawa outer iterations: {}", st.outer_iterations);
        if st.outer_exhausted {
            s.push_str("# warning: augmentation stopped at the outer iteration limit\n");
        }
    }
    s
}

pub fn analysis_report(a: &Analysis, termination: Option<Termination>, iterations: Option<usize>) -> String {
    let c = &a.candidate;
    let mut s = String::new();
    let _ = writeln!(s, "objective = {:.17e}", c.objective);
    match c.shape_objective {
        Some(f) => {
            let _ = writeln!(s, "shape_objective = {f:.17e}");
        }
        None => s.push_str("shape_objective = none\n"),
    }
    let _ = writeln!(s, "feasible = {}", c.feasible);
    let _ = writeln!(s, "volume_fraction = {:.9}", c.volume_fraction);
    let _ = writeln!(s, "input_force = {:.17e}", c.design.input_force);
    if let Some(z) = &a.invariants {
        let _ = writeln!(s, "zeta_s_percent = {:.6}", 100.0 * z.zeta_s);
        let _ = writeln!(s, "zeta_l_percent = {:.6}", 100.0 * z.zeta_l);
    }
    if let Some(e) = &a.errors {
        let _ = writeln!(
            s,
            "fsd_errors = a {:.9e} b {:.9e} length {:.9e} theta {:.9e}",
            e.a, e.b, e.length, e.theta
        );
    }
    if let Some(w) = a.end_compliance {
        let _ = writeln!(s, "end_compliance = {w:.9e}");
    }
    let _ = writeln!(s, "newton_iterations = {}", c.diagnostics.newton_iterations);
    let _ = writeln!(s, "active_contacts = {}", a.sites.len());
    if let Some(f) = &c.diagnostics.failure {
        let _ = writeln!(s, "failure = {f}");
    }
    if let Some(k) = iterations {
        let _ = writeln!(s, "iterations = {k}");
    }
    if let Some(t) = termination {
        let _ = writeln!(
            s,
            "termination = {}",
            match t {
                Termination::MaxIterations => "max_iterations",
                Termination::Stalled => "stalled",
            }
        );
    }
    s
}

fn write_analysis(dir: &Path, problem: &Problem, cfg: &ProblemConfig, a: &Analysis) -> Result<(), SynthesisError> {
    write_atomic(&dir.join("material.txt"), &material_text(&a.material))?;
    write_atomic(
        &dir.join("curve_actual.txt"),
        &a.actual_curve.as_deref().map(format_curve).unwrap_or_default(),
    )?;
    write_atomic(&dir.join("curve_desired.txt"), &format_curve(&problem.target))?;
    write_atomic(&dir.join("contact_report.txt"), &contact_report(a))?;
    write_atomic(&dir.join("final.svg"), &svg::render(problem, a, cfg.symmetry, "final design"))?;
    Ok(())
}

/// The configuration with its file references made absolute, so the stored
/// copy can be used from the output directory.
fn portable(cfg: &ProblemConfig) -> ProblemConfig {
    let abs = |p: PathBuf| std::path::absolute(&p).unwrap_or(p);
    let mut out = cfg.clone();
    out.shape_morphing.target = abs(cfg.target_path());
    if let Some(p) = &cfg.optimizer.initial_design {
        out.optimizer.initial_design = Some(abs(cfg.resolve(p)));
    }
    out
}

fn write_manifest(dir: &Path, cfg: &ProblemConfig, command: &str) -> Result<(), SynthesisError> {
    write_atomic(&dir.join("config.toml"), &portable(cfg).to_toml_string())?;
    write_atomic(
        &dir.join("manifest.txt"),
        &format!("program = morphsynth\nversion = {VERSION}\ncommand = {command}\nseed = {}\n", cfg.seed),
    )
}

/// Hill-climbing synthesis; all artifacts land in `out`.
pub fn run_synthesis(cfg: &ProblemConfig, out: &Path, opts: &RunOptions) -> Result<RunSummary, SynthesisError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let problem = Problem::from_config(&cfg)?;
    let initial = problem.initial_design(&cfg)?;
    let ocfg = problem.optimizer_config(&cfg);
    write_manifest(out, &cfg, "synth")?;

    let mut frame_error = None;
    let mut observer = |rec: &IterationRecord, best: &optimizer::Candidate| {
        log::debug!("iter {} incumbent {:.6e} candidate {:.6e}", rec.iter, rec.f_incumbent, rec.f_candidate);
        if opts.frames_every == 0 || !rec.iter.is_multiple_of(opts.frames_every) || frame_error.is_some() {
            return;
        }
        let a = analyze(&problem, &best.design, false);
        let title = format!("iteration {} objective {:.6e}", rec.iter, rec.f_incumbent);
        let path = out.join("frames").join(format!("frame_{:05}.svg", rec.iter));
        if let Err(e) = write_atomic(&path, &svg::render(&problem, &a, cfg.symmetry, &title)) {
            frame_error = Some(e);
        }
    };
    let mut evaluator = ProblemEvaluator { problem: &problem };
    let result = optimizer::run(&mut evaluator, &initial, &ocfg, &mut observer);
    if let Some(e) = frame_error {
        return Err(e);
    }

    let final_analysis = analyze(&problem, &result.best.design, false);
    let mut warnings = Vec::new();
    if result.termination == Termination::Stalled {
        warnings.push(format!("run stalled after {} iterations", result.history.len() - 1));
    }
    if !result.best.feasible {
        warnings.push("no feasible design was found".to_string());
    }
    write_atomic(&out.join("best_design.txt"), &result.best.design.to_text())?;
    write_atomic(&out.join("initial_design.txt"), &result.initial.design.to_text())?;
    write_atomic(&out.join("iterations.csv"), &history_csv(&result.history))?;
    write_analysis(out, &problem, &cfg, &final_analysis)?;
    let mut report = analysis_report(&final_analysis, Some(result.termination), Some(result.history.len() - 1));
    let _ = writeln!(report, "initial_objective = {:.17e}", result.initial.objective);
    for w in &warnings {
        let _ = writeln!(report, "warning = {w}");
    }
    write_atomic(&out.join("report.txt"), &report)?;
    Ok(RunSummary {
        result,
        final_analysis,
        warnings,
    })
}

/// Single analysis of a stored design.
pub fn replay(design_path: &Path, cfg: &ProblemConfig, out: &Path) -> Result<Analysis, SynthesisError> {
    let problem = Problem::from_config(cfg)?;
    let design: DesignVector = load_design(design_path)?;
    let a = analyze(&problem, &design, false);
    write_manifest(out, cfg, "replay")?;
    write_analysis(out, &problem, cfg, &a)?;
    write_atomic(&out.join("report.txt"), &analysis_report(&a, None, None))?;
    Ok(a)
}
