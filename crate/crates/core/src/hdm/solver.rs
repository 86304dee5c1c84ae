use nalgebra::{DMatrix, DVector};

use super::{hdm_sensitivities, Functional, HdmModel, HdmSample};
use crate::linalg::{ensure_finite_vector, DenseLu};
use crate::{Error, Result};

/// Halvings tried on the Newton step before falling back to continuation.
const DAMPING_STEPS: usize = 8;

/// Newton / pseudo-transient continuation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Absolute residual tolerance; `None` means `1e-12·√N`.
    pub abs_tol: Option<f64>,
    /// Tolerance relative to the initial residual norm.
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Initial pseudo-time step Δt₀.
    pub initial_time_step: f64,
    /// Upper clamp on the per-step Δt growth factor.
    pub max_growth: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            abs_tol: None,
            rel_tol: 1e-12,
            max_iterations: 100,
            initial_time_step: 1.0,
            max_growth: 100.0,
        }
    }
}

impl SolverOptions {
    pub fn absolute_tolerance(&self, state_dim: usize) -> f64 {
        self.abs_tol
            .unwrap_or_else(|| 1e-12 * (state_dim as f64).sqrt())
    }
}

/// Outcome of [`solve_hdm`].
#[derive(Debug, Clone)]
pub struct HdmSolve {
    pub state: DVector<f64>,
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    pub iterations: usize,
    /// Iterations that used the pure Newton step.
    pub newton_steps: usize,
    /// Iterations that fell back to a regularized pseudo-time step.
    pub continuation_steps: usize,
}

/// Solves `R(w, μ) = 0` starting from `w0`.
///
/// Each iteration first tries the Newton step, halved up to eight times until
/// the residual norm drops sufficiently. Otherwise it takes the pseudo-transient step
/// `(I/Δt + ∂R/∂w) δ = −R`. Δt starts at `initial_time_step` and grows by
/// `‖R_{k−1}‖/‖R_k‖` clamped to `[1, max_growth]` after every accepted step
/// (switched evolution relaxation).
pub fn solve_hdm<M: HdmModel + ?Sized>(
    model: &M,
    mu: &DVector<f64>,
    w0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<HdmSolve> {
    model.check_dims(w0, mu)?;
    ensure_finite_vector("initial state", w0)?;
    ensure_finite_vector("parameter", mu)?;

    let n = model.state_dim();
    let abs_tol = opts.absolute_tolerance(n);
    let mut w = w0.clone();
    let mut r = model.residual(&w, mu);
    let mut r_norm = r.norm();
    if !r_norm.is_finite() {
        return Err(Error::InvalidState("residual at initial state is not finite".into()));
    }
    let initial = r_norm;
    let converged = |norm: f64| norm <= abs_tol || norm <= opts.rel_tol * initial;

    let mut report = HdmSolve {
        state: w.clone(),
        residual_norm: r_norm,
        initial_residual_norm: initial,
        iterations: 0,
        newton_steps: 0,
        continuation_steps: 0,
    };
    if converged(r_norm) {
        return Ok(report);
    }

    let mut dt = opts.initial_time_step;
    for iteration in 1..=opts.max_iterations {
        let jac = model.jacobian_state(&w, mu);

        let newton = DenseLu::new(jac.clone())
            .and_then(|lu| lu.solve_vec(&r))
            .ok()
            .and_then(|delta| {
                let mut alpha = 1.0;
                for _ in 0..DAMPING_STEPS {
                    let trial = &w - &delta * alpha;
                    let tr = model.residual(&trial, mu);
                    let tn = tr.norm();
                    if tn.is_finite() && tn <= (1.0 - 1e-4 * alpha) * r_norm {
                        return Some((trial, tr));
                    }
                    alpha *= 0.5;
                }
                None
            });

        let (trial, trial_r, used_newton) = match newton {
            Some((trial, tr)) => (trial, tr, true),
            None => {
                let mut accepted = None;
                // Shrink Δt until the regularized step is not wildly uphill.
                for _ in 0..20 {
                    let shifted = &jac + DMatrix::identity(n, n) / dt;
                    let delta = DenseLu::new(shifted)?.solve_vec(&r)?;
                    let trial = &w - delta;
                    let tr = model.residual(&trial, mu);
                    let tn = tr.norm();
                    if tn.is_finite() && tn < 2.0 * r_norm {
                        accepted = Some((trial, tr));
                        break;
                    }
                    dt *= 0.25;
                }
                match accepted {
                    Some((trial, tr)) => (trial, tr, false),
                    None => {
                        return Err(Error::NonConvergence {
                            iterations: iteration,
                            residual_norm: report.residual_norm,
                            best_iterate: report.state.as_slice().to_vec(),
                        })
                    }
                }
            }
        };

        let new_norm = trial_r.norm();
        let growth = if new_norm > 0.0 {
            (r_norm / new_norm).clamp(1.0, opts.max_growth)
        } else {
            opts.max_growth
        };
        dt *= growth;
        w = trial;
        r = trial_r;
        r_norm = new_norm;
        report.iterations = iteration;
        if used_newton {
            report.newton_steps += 1;
        } else {
            report.continuation_steps += 1;
        }
        if r_norm < report.residual_norm {
            report.state = w.clone();
            report.residual_norm = r_norm;
        }
        if converged(r_norm) {
            report.state = w;
            report.residual_norm = r_norm;
            return Ok(report);
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual_norm: report.residual_norm,
        best_iterate: report.state.as_slice().to_vec(),
    })
}

/// Solves the full model at `mu` and collects everything a snapshot needs.
pub fn sample_hdm<M: HdmModel + ?Sized, F: Functional + ?Sized>(
    model: &M,
    objective: &F,
    mu: &DVector<f64>,
    w0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<(HdmSample, HdmSolve)> {
    let solve = solve_hdm(model, mu, w0, opts)?;
    let sensitivities = hdm_sensitivities(model, &solve.state, mu)?;
    let sample = HdmSample {
        mu: mu.clone(),
        objective_value: objective.value(&solve.state, mu),
        residual_norm_at_solve: solve.residual_norm,
        state: solve.state.clone(),
        sensitivities,
    };
    Ok((sample, solve))
}
