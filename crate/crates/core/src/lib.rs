//! Numerical laboratory for conservation laws regularized by nonlinear
//! viscosity and linear dispersion:
//!
//! u_t + f(u)_x = ε (β(u_x))_x − δ u_xxx
//!
//! The crate provides the flux and viscosity models, a conservative
//! finite-difference solver, an entropy-solution reference, diagnostics on
//! trajectories, and an experiment harness that sweeps ε → 0 along coupling
//! curves δ = C ε^p.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod harness;
pub mod io;
pub mod models;
pub mod reference;
pub mod solver;

pub use models::{EntropyPair, FluxModel, ViscosityModel};
pub use reference::{ReferenceScheme, ReferenceSolution};
pub use solver::{Grid1D, RegularizationParams, SimState, Trajectory};
