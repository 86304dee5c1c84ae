//! Progressive ROM-constrained optimization and its full-model reference.
//!
//! [`progressive_optimize`] alternates between sampling the full model at the
//! latest reduced optimum, updating the reduced basis in place, and solving a
//! reduced optimization problem whose feasible set is limited by a
//! residual-based trust region `½‖R(w̄ + Φy(μ), μ)‖² ≤ ε`. The trust-region
//! radius `ε` is adapted between subproblems from the agreement between
//! predicted and actual objective decrease.
//!
//! [`hdm_optimize`] solves the same problem with every objective evaluation
//! backed by a full-model solve, for comparison.

mod database;
mod progressive;
mod reference;
mod runlog;

pub use database::{SnapshotDatabase, DATA_FILE, INDEX_FILE};
pub use progressive::{progressive_optimize, ProgressiveOptions, ProgressiveOutcome, RunStatus};
pub use reference::{hdm_optimize, HdmOptions, HdmOutcome};
pub use runlog::{QueryRecord, RunLog, RunSummary, SubproblemRecord, CSV_FILE, JSON_FILE};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::hdm::HdmModel;
use crate::{Error, Result};

/// Returned by [`rho`] when the predicted decrease vanishes.
pub const RHO_SENTINEL: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionState {
    pub epsilon: f64,
    pub tau: f64,
    pub last_rho: Option<f64>,
}

impl TrustRegionState {
    pub fn new(epsilon: f64, tau: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("trust-region size must be positive, got {epsilon}")));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(Self {
            epsilon,
            tau,
            last_rho: None,
        })
    }
}

/// Grows `ε` by `1/τ` when `ρ ∈ [½, 2]`, keeps it when `ρ ∈ [¼, ½) ∪ (2, 4]`
/// and shrinks it by `τ` otherwise (including NaN).
pub fn adapt_epsilon(tr: TrustRegionState, rho: f64) -> TrustRegionState {
    let epsilon = if (0.5..=2.0).contains(&rho) {
        tr.epsilon / tr.tau
    } else if (0.25..0.5).contains(&rho) || (rho > 2.0 && rho <= 4.0) {
        tr.epsilon
    } else {
        tr.tau * tr.epsilon
    };
    TrustRegionState {
        epsilon,
        tau: tr.tau,
        last_rho: Some(rho),
    }
}

/// Ratio of actual to predicted objective change between a subproblem's
/// starting point and its solution.
pub fn rho(actual_start: f64, actual_new: f64, predicted_start: f64, predicted_new: f64) -> f64 {
    let actual = actual_new - actual_start;
    let predicted = predicted_new - predicted_start;
    if predicted.abs() < 1e-14 * actual.abs().max(1.0) {
        return if actual < 0.0 { -RHO_SENTINEL } else { RHO_SENTINEL };
    }
    actual / predicted
}

/// Sampled parameter with the lowest objective; ties go to the earliest.
pub fn select_init_param(db: &SnapshotDatabase) -> Result<DVector<f64>> {
    db.best_index()
        .map(|i| db.samples()[i].mu.clone())
        .ok_or_else(|| Error::invalid("snapshot database is empty"))
}

/// Stored state with the smallest residual norm at `mu`.
pub fn select_init_state<M: HdmModel + ?Sized>(
    db: &SnapshotDatabase,
    model: &M,
    mu: &DVector<f64>,
) -> Result<DVector<f64>> {
    db.closest_state(model, mu)
        .map(|(i, _)| db.samples()[i].state.clone())
        .ok_or_else(|| Error::invalid("snapshot database is empty"))
}

/// `‖μ_prev − μ_new‖ ≤ δ‖μ_new‖`, or `≤ δ` when `μ_new = 0`.
pub fn converged(mu_prev: &DVector<f64>, mu_new: &DVector<f64>, delta: f64) -> bool {
    let gap = (mu_prev - mu_new).norm();
    let scale = mu_new.norm();
    if scale == 0.0 {
        gap <= delta
    } else {
        gap <= delta * scale
    }
}
