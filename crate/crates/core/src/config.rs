//! Problem description read from a TOML file.
//!
//! Omitted parameters take the standard synthesis values. Parameters that
//! depend on the domain (penalties, mutation step, contact search radius)
//! stay unset in the file and are derived on access.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hexmesh::SQRT3;
use crate::optimizer::VolumePenalty;
use crate::shape_objective::{ObjectiveWeights, ZetaMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Syntax(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Node selection on the reference mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeSelector {
    /// explicit node ids, in order
    Nodes(Vec<usize>),
    /// the node nearest to each point, in order
    Near(Vec<[f64; 2]>),
    /// every node inside `[x0, y0, x1, y1]`
    Box([f64; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fix {
    Xy,
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub cols: usize,
    pub rows: usize,
    pub edge_length: f64,
}

fn d_e() -> f64 {
    2100.0
}
fn d_nu() -> f64 {
    0.33
}
fn d_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default = "d_e")]
    pub youngs_modulus: f64,
    #[serde(default = "d_nu")]
    pub poisson_ratio: f64,
    #[serde(default = "d_one")]
    pub thickness: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig {
            youngs_modulus: d_e(),
            poisson_ratio: d_nu(),
            thickness: d_one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportConfig {
    pub select: NodeSelector,
    #[serde(default = "d_fix")]
    pub fix: Fix,
}

fn d_fix() -> Fix {
    Fix::Xy
}

fn d_force_limits() -> [f64; 2] {
    [-1000.0, 1000.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub select: NodeSelector,
    /// direction of positive force; normalized on use
    pub direction: [f64; 2],
    /// initial total force, N; midpoint of `limits` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
    #[serde(default = "d_force_limits")]
    pub limits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeMorphingConfig {
    pub select: NodeSelector,
    /// sort key for box selections; defaults to the longer box side
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Axis>,
    /// target curve file, relative to the configuration file
    pub target: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Solid,
    Void,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub kind: RegionKind,
    /// `[x0, y0, x1, y1]`; elements whose centroid falls inside
    pub rect: [f64; 4],
}

fn d_grid() -> [usize; 2] {
    [12, 8]
}
fn d_rmin() -> f64 {
    0.1
}
fn d_rmax() -> f64 {
    8.0
}
fn d_segments() -> usize {
    64
}
fn d_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    /// masks along x and y in the initial layout
    #[serde(default = "d_grid")]
    pub grid: [usize; 2],
    #[serde(default = "d_rmin")]
    pub r_min: f64,
    #[serde(default = "d_rmax")]
    pub r_max: f64,
    /// initial radius; `r_max / 2` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_radius: Option<f64>,
    #[serde(default = "d_fraction")]
    pub initial_fraction: f64,
    /// allow masks to spawn rigid contact circles
    #[serde(default = "d_true")]
    pub contact_surfaces: bool,
    #[serde(default = "d_segments")]
    pub circle_segments: usize,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            grid: d_grid(),
            r_min: d_rmin(),
            r_max: d_rmax(),
            initial_radius: None,
            initial_fraction: d_fraction(),
            contact_surfaces: true,
            circle_segments: d_segments(),
        }
    }
}

fn d_true() -> bool {
    true
}
fn d_pr() -> f64 {
    0.08
}
fn d_iters() -> usize {
    5000
}
fn d_delta_f() -> f64 {
    0.01
}
fn d_window() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "d_pr")]
    pub pr: f64,
    #[serde(default = "d_iters")]
    pub max_iters: usize,
    /// mutation step, mm; `0.1·max(L1, L2)` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// force mutation step, N; equal to `step` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_step: Option<f64>,
    #[serde(default = "d_delta_f")]
    pub delta_f: f64,
    /// 0 disables the stall test
    #[serde(default = "d_window")]
    pub stall_window: usize,
    #[serde(default)]
    pub volume: VolumePenalty,
    /// design file to start from instead of the uniform layout
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_design: Option<PathBuf>,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            pr: d_pr(),
            max_iters: d_iters(),
            step: None,
            force_step: None,
            delta_f: d_delta_f(),
            stall_window: d_window(),
            volume: VolumePenalty::default(),
            initial_design: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSection {
    /// mutual-contact penalty, N/mm³; `60E/L2` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_mutual: Option<f64>,
    /// self-contact penalty, N/mm³; `5E/L2` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_self: Option<f64>,
    /// `2a` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_radius: Option<f64>,
    /// deepest credible penetration; `a/2` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<f64>,
    #[serde(default = "d_true")]
    pub self_contact: bool,
}

fn d_harmonics() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsdSection {
    #[serde(default = "d_harmonics")]
    pub harmonics: usize,
    #[serde(default)]
    pub weights: ObjectiveWeights,
    #[serde(default)]
    pub zeta_mode: ZetaMode,
}

impl Default for FsdSection {
    fn default() -> Self {
        FsdSection {
            harmonics: d_harmonics(),
            weights: ObjectiveWeights::default(),
            zeta_mode: ZetaMode::default(),
        }
    }
}

fn d_steps() -> usize {
    10
}
fn d_newton() -> usize {
    25
}
fn d_outer() -> usize {
    10
}
fn d_passes() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "d_steps")]
    pub load_steps: usize,
    #[serde(default = "d_newton")]
    pub max_iterations: usize,
    #[serde(default = "d_outer")]
    pub max_outer: usize,
    /// penetration tolerance, mm; `1e-4·a` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    /// boundary smoothing passes β
    #[serde(default = "d_passes")]
    pub smoothing_passes: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            load_steps: d_steps(),
            max_iterations: d_newton(),
            max_outer: d_outer(),
            gap_tol: None,
            smoothing_passes: d_passes(),
        }
    }
}

/// Mirror line used when exporting half-domain results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryConfig {
    /// `x` mirrors across the vertical line `x = at`, `y` across `y = at`
    pub axis: Axis,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    pub supports: Vec<SupportConfig>,
    pub load: LoadConfig,
    pub shape_morphing: ShapeMorphingConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RegionConfig>,
    #[serde(default)]
    pub masks: MaskConfig,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub contact: ContactSection,
    #[serde(default)]
    pub fsd: FsdSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetryConfig>,
    /// directory that relative paths are resolved against
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn check_selector(key: &str, s: &NodeSelector) -> Result<(), ConfigError> {
    match s {
        NodeSelector::Nodes(v) if v.is_empty() => Err(invalid(key, "empty node list")),
        NodeSelector::Near(v) if v.is_empty() => Err(invalid(key, "empty point list")),
        NodeSelector::Box(b) if !(b[0] <= b[2] && b[1] <= b[3]) => Err(invalid(key, "box must be [x0, y0, x1, y1] with x0 ≤ x1, y0 ≤ y1")),
        _ => Ok(()),
    }
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ProblemConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Nominal domain extents `(cols·3a/2, rows·√3a)`.
    pub fn extents(&self) -> (f64, f64) {
        let a = self.domain.edge_length;
        (self.domain.cols as f64 * 1.5 * a, self.domain.rows as f64 * SQRT3 * a)
    }

    pub fn eps_mutual(&self) -> f64 {
        self.contact
            .eps_mutual
            .unwrap_or(60.0 * self.material.youngs_modulus / self.extents().1)
    }

    pub fn eps_self(&self) -> f64 {
        self.contact
            .eps_self
            .unwrap_or(5.0 * self.material.youngs_modulus / self.extents().1)
    }

    pub fn search_radius(&self) -> f64 {
        self.contact.search_radius.unwrap_or(2.0 * self.domain.edge_length)
    }

    pub fn max_depth(&self) -> f64 {
        self.contact.max_depth.unwrap_or(0.5 * self.domain.edge_length)
    }

    pub fn mutation_step(&self) -> f64 {
        let (l1, l2) = self.extents();
        self.optimizer.step.unwrap_or(0.1 * l1.max(l2))
    }

    pub fn force_step(&self) -> f64 {
        self.optimizer.force_step.unwrap_or_else(|| self.mutation_step())
    }

    pub fn gap_tol(&self) -> f64 {
        self.solver.gap_tol.unwrap_or(1e-4 * self.domain.edge_length)
    }

    pub fn initial_force(&self) -> f64 {
        let [lo, hi] = self.load.limits;
        self.load.initial.unwrap_or(0.5 * (lo + hi))
    }

    pub fn initial_radius(&self) -> f64 {
        self.masks.initial_radius.unwrap_or(0.5 * self.masks.r_max)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn target_path(&self) -> PathBuf {
        self.resolve(&self.shape_morphing.target)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.domain.cols == 0 {
            return Err(invalid("domain.cols", "must be at least 1"));
        }
        if self.domain.rows == 0 {
            return Err(invalid("domain.rows", "must be at least 1"));
        }
        positive("domain.edge_length", self.domain.edge_length)?;
        positive("material.youngs_modulus", self.material.youngs_modulus)?;
        let nu = self.material.poisson_ratio;
        if !(nu > 0.0 && nu < 0.5) {
            return Err(invalid("material.poisson_ratio", format!("must lie in (0, 0.5), got {nu}")));
        }
        positive("material.thickness", self.material.thickness)?;
        if self.supports.is_empty() {
            return Err(invalid("supports", "at least one support is required"));
        }
        for (i, s) in self.supports.iter().enumerate() {
            check_selector(&format!("supports[{i}].select"), &s.select)?;
        }
        check_selector("load.select", &self.load.select)?;
        let [dx, dy] = self.load.direction;
        if !(dx.hypot(dy) > 0.0) {
            return Err(invalid("load.direction", "must be a nonzero vector"));
        }
        let [lo, hi] = self.load.limits;
        if !(lo < hi) {
            return Err(invalid("load.limits", format!("lower limit {lo} must be below upper limit {hi}")));
        }
        if let Some(f) = self.load.initial {
            if !(lo..=hi).contains(&f) {
                return Err(invalid("load.initial", format!("{f} outside limits [{lo}, {hi}]")));
            }
        }
        check_selector("shape_morphing.select", &self.shape_morphing.select)?;
        for (i, r) in self.regions.iter().enumerate() {
            if !(r.rect[0] <= r.rect[2] && r.rect[1] <= r.rect[3]) {
                return Err(invalid(&format!("regions[{i}].rect"), "must be [x0, y0, x1, y1] with x0 ≤ x1, y0 ≤ y1"));
            }
        }
        let m = &self.masks;
        if m.grid[0] == 0 || m.grid[1] == 0 {
            return Err(invalid("masks.grid", "both counts must be at least 1"));
        }
        positive("masks.r_min", m.r_min)?;
        if !(m.r_min < m.r_max) {
            return Err(invalid("masks.r_max", format!("must exceed masks.r_min = {}", m.r_min)));
        }
        if let Some(r) = m.initial_radius {
            if !(m.r_min..=m.r_max).contains(&r) {
                return Err(invalid("masks.initial_radius", format!("{r} outside [r_min, r_max]")));
            }
        }
        if !(m.initial_fraction > 0.0 && m.initial_fraction < 1.0) {
            return Err(invalid("masks.initial_fraction", "must lie in (0, 1)"));
        }
        if m.circle_segments < 8 {
            return Err(invalid("masks.circle_segments", "must be at least 8"));
        }
        let o = &self.optimizer;
        if !(o.pr > 0.0 && o.pr < 1.0) {
            return Err(invalid("optimizer.pr", format!("must lie in (0, 1), got {}", o.pr)));
        }
        if let Some(s) = o.step {
            positive("optimizer.step", s)?;
        }
        if let Some(s) = o.force_step {
            positive("optimizer.force_step", s)?;
        }
        positive("optimizer.delta_f", o.delta_f)?;
        if !(0.0..=1.0).contains(&o.volume.target) {
            return Err(invalid("optimizer.volume.target", "must lie in [0, 1]"));
        }
        if !(o.volume.weight >= 0.0) {
            return Err(invalid("optimizer.volume.weight", "must be nonnegative"));
        }
        let c = &self.contact;
        for (key, v) in [
            ("contact.eps_mutual", c.eps_mutual),
            ("contact.eps_self", c.eps_self),
            ("contact.search_radius", c.search_radius),
            ("contact.max_depth", c.max_depth),
            ("solver.gap_tol", self.solver.gap_tol),
        ] {
            if let Some(v) = v {
                positive(key, v)?;
            }
        }
        if self.fsd.harmonics == 0 {
            return Err(invalid("fsd.harmonics", "must be at least 1"));
        }
        let w = &self.fsd.weights;
        for (key, v) in [
            ("fsd.weights.lambda_a", w.lambda_a),
            ("fsd.weights.lambda_b", w.lambda_b),
            ("fsd.weights.lambda_l", w.lambda_l),
            ("fsd.weights.lambda_theta", w.lambda_theta),
        ] {
            if !(v >= 0.0) {
                return Err(invalid(key, "must be nonnegative"));
            }
        }
        if self.solver.load_steps == 0 {
            return Err(invalid("solver.load_steps", "must be at least 1"));
        }
        if self.solver.max_iterations == 0 {
            return Err(invalid("solver.max_iterations", "must be at least 1"));
        }
        if self.solver.max_outer == 0 {
            return Err(invalid("solver.max_outer", "must be at least 1"));
        }
        if self.solver.smoothing_passes == 0 {
            return Err(invalid("solver.smoothing_passes", "must be at least 1"));
        }
        Ok(())
    }
}

/// Read, parse and validate; the target curve and any initial design must exist.
pub fn parse_config(path: &Path) -> Result<ProblemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let cfg = ProblemConfig::from_toml_str(&text, &base)?;
    if !cfg.target_path().is_file() {
        return Err(invalid(
            "shape_morphing.target",
            format!("file `{}` not found", cfg.target_path().display()),
        ));
    }
    if let Some(p) = &cfg.optimizer.initial_design {
        if !cfg.resolve(p).is_file() {
            return Err(invalid("optimizer.initial_design", format!("file `{}` not found", p.display())));
        }
    }
    Ok(cfg)
}
