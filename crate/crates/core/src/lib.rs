//! Macroscopic pedestrian flow on unstructured triangular meshes.
//!
//! Two crowd models share one vertex-centered finite-volume discretization:
//! the first-order Hughes model (density only, Lax–Friedrichs fluxes) and a
//! second-order model with momentum, isentropic pressure and relaxation
//! towards the desired velocity (HLL fluxes). In both, pedestrians walk
//! along `-grad phi` where `phi` solves an eikonal equation whose running
//! cost grows with density.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod eikonal;
pub mod error;
pub mod exec;
pub mod mesh;
pub mod physics;
pub mod scenario;
pub mod solver;
pub mod study;
pub mod vtk;

pub use error::{Error, Result};
pub use exec::Execution;
