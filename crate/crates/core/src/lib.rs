//! Progressive construction of parametric reduced-order models for
//! PDE-constrained optimization.
//!
//! The crate is organized bottom-up:
//!
//! * [`basis`]: thin SVD, POD, state/sensitivity POD and Brand-style
//!   low-rank updates (append columns, translate columns) of factored bases.
//! * [`hdm`]: the high-dimensional model contract, a Newton solver with
//!   pseudo-transient continuation, state sensitivities and functional
//!   gradients (direct and adjoint), plus two built-in models.
//! * [`rom`]: least-squares Petrov–Galerkin and Galerkin reduced models,
//!   the Gauss–Newton reduced solve, the residual error indicator and
//!   reduced sensitivities.
//! * [`nlp`]: a bound-constrained quadratic-penalty optimizer used both for
//!   full-model (nested analysis and design) optimization and for the reduced
//!   trust-region subproblems.
//! * [`driver`]: the progressive ROM-constrained optimization loop, the
//!   snapshot database, run logs and the full-model reference optimizer.
//! * [`cli`]: JSON run configurations, batch execution and report tables.

pub mod basis;
pub mod cli;
pub mod driver;
mod error;
pub mod hdm;
pub mod linalg;
pub mod nlp;
pub mod rom;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
