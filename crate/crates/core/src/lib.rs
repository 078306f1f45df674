// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Synthesis of contact-aided shape-morphing compliant mechanisms.
//!
//! A honeycomb design domain is carved by negative circular masks, analysed
//! with large-deformation polygonal finite elements including self and
//! mutual contact, and scored against a target curve with Fourier shape
//! descriptors. A stochastic hill climber improves the mask layout.

pub mod config;
pub mod contact;
pub mod design;
pub mod fem;
pub mod geometry;
pub mod hexmesh;
pub mod optimizer;
pub mod pipeline;
pub mod shape_objective;
pub mod smoothing;
pub mod svg;
pub mod synthesis;
