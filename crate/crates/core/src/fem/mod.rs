//! Large-deformation plane-strain analysis on polygonal elements.

pub mod material;
pub mod model;
pub mod shape;
pub mod solver;
pub mod sparse;

pub use material::{cauchy_stress, strain_energy_density, MaterialError, MaterialParams};
pub use model::{end_compliance, ElementError, FeModel, PolygonElement, QuadPoint};
pub use shape::{mean_value_shape_functions, ShapeFnError, ShapeValues};
pub use solver::{
    newton_solve, BoundaryConditions, ContactHook, HookFailure, NewtonConfig, NewtonRecord, NoContact, SolverError,
    SolverState, StepRecord,
};
pub use sparse::{solve_reduced, CooMatrix, LinearSolveError};
