//! High-dimensional model contract and its discrete sensitivity machinery.
//!
//! A model supplies the discrete residual `R(w, μ)` and its Jacobians with
//! respect to the state `w` and parameters `μ`. Everything else (steady
//! solves, state sensitivities, functional gradients) is written against
//! the [`HdmModel`] trait.

mod burgers;
mod functional;
mod linear;
mod sensitivity;
mod solver;

pub use burgers::BurgersModel;
pub use functional::{Functional, InverseDesignObjective};
pub use linear::LinearParametricModel;
pub use sensitivity::{gradient_adjoint, gradient_direct, hdm_sensitivities};
pub use solver::{sample_hdm, solve_hdm, HdmSolve, SolverOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Admissible parameters: a box `lower ≤ μ ≤ upper` plus pinned components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `(index, value)` pairs held fixed.
    #[serde(default)]
    pub fixed: Vec<(usize, f64)>,
}

impl ParameterDomain {
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        Self {
            lower: vec![lower; dim],
            upper: vec![upper; dim],
            fixed: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::invalid("lower and upper bounds differ in length"));
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l <= u) {
                return Err(Error::invalid(format!("bound {i}: lower {l} exceeds upper {u}")));
            }
        }
        for &(i, v) in &self.fixed {
            if i >= self.dim() {
                return Err(Error::invalid(format!("fixed index {i} out of range")));
            }
            if v < self.lower[i] || v > self.upper[i] {
                return Err(Error::invalid(format!(
                    "fixed value {v} for component {i} lies outside its bounds"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, mu: &DVector<f64>) -> bool {
        mu.len() == self.dim()
            && mu
                .iter()
                .enumerate()
                .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
            && self.fixed.iter().all(|&(i, v)| mu[i] == v)
    }

    /// Clamps into the box and applies the pinned values.
    pub fn project(&self, mu: &DVector<f64>) -> DVector<f64> {
        let mut out =
            DVector::from_fn(mu.len(), |i, _| mu[i].clamp(self.lower[i], self.upper[i]));
        for &(i, v) in &self.fixed {
            out[i] = v;
        }
        out
    }
}

/// The discrete residual of a parametrized steady PDE.
pub trait HdmModel {
    fn state_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn domain(&self) -> ParameterDomain;

    fn residual(&self, w: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64>;
    /// `∂R/∂w`, N×N.
    fn jacobian_state(&self, w: &DVector<f64>, mu: &DVector<f64>) -> DMatrix<f64>;
    /// `∂R/∂μ`, N×n_p.
    fn jacobian_param(&self, w: &DVector<f64>, mu: &DVector<f64>) -> DMatrix<f64>;

    /// Cold-start state used when nothing better is known.
    fn initial_guess(&self, _mu: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.state_dim())
    }

    fn check_dims(&self, w: &DVector<f64>, mu: &DVector<f64>) -> Result<()> {
        if w.len() != self.state_dim() {
            return Err(Error::invalid(format!(
                "state has length {}, model expects {}",
                w.len(),
                self.state_dim()
            )));
        }
        if mu.len() != self.param_dim() {
            return Err(Error::invalid(format!(
                "parameter has length {}, model expects {}",
                mu.len(),
                self.param_dim()
            )));
        }
        Ok(())
    }
}

/// A converged full-model solution with its sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct HdmSample {
    pub mu: DVector<f64>,
    pub state: DVector<f64>,
    /// `∂w/∂μ`, N×n_p.
    pub sensitivities: DMatrix<f64>,
    pub objective_value: f64,
    pub residual_norm_at_solve: f64,
}
