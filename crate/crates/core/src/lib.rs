//! Matrix-free Krylov solvers for tomographic reconstruction.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the bottom name the two concrete precisions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod krylov;
pub mod metrics;
pub mod operators;
pub mod regparam;
pub mod scalar;
pub mod simulation;
pub mod solvers;
pub mod vecops;

pub use error::{Error, Result};
pub use scalar::{Precision, Real};

pub type Volume32 = operators::Volume<f32>;
pub type Volume64 = operators::Volume<f64>;
pub type ProjectionSet32 = operators::ProjectionSet<f32>;
pub type ProjectionSet64 = operators::ProjectionSet<f64>;
pub type CtProjector32 = operators::CtProjector<f32>;
pub type CtProjector64 = operators::CtProjector<f64>;
pub type SolverOptions32 = solvers::SolverOptions<f32>;
pub type SolverOptions64 = solvers::SolverOptions<f64>;
pub type SolveResult32 = solvers::SolveResult<f32>;
pub type SolveResult64 = solvers::SolveResult<f64>;
