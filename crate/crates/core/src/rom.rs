//! Projection-based reduced-order models on an affine trial subspace.
//!
//! The reduced state `y` parametrizes `w_r = w̄ + Φ y`. The least-squares
//! Petrov–Galerkin (LSPG) model picks `y` minimizing `½‖R(w_r, μ)‖²`, which
//! is solved by Gauss–Newton; the Galerkin model enforces `Φᵀ R(w_r, μ) = 0`
//! and is solved by Newton. Both use the same Armijo backtracking.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::RomSpace;
use crate::hdm::{Functional, HdmModel};
use crate::linalg::{least_squares, DenseLu, ThinQr};
use crate::nlp::{armijo_linesearch, ArmijoParams};
use crate::{Error, Result};

/// Rank cutoff used in the reduced least-squares solves.
const LSQ_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Galerkin,
    #[default]
    Lspg,
}

/// Gauss–Newton / Newton settings for [`RomInstance::solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct RomSolveOptions {
    pub max_iterations: usize,
    /// Stop when the gradient norm drops below `gradient_tol · max(1, ‖R(y0)‖)`.
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub linesearch: ArmijoParams,
}

impl Default for RomSolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            gradient_tol: 1e-10,
            step_tol: 1e-14,
            linesearch: ArmijoParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RomSolveReport {
    pub y: DVector<f64>,
    /// `½‖R(w̄ + Φy, μ)‖²` at exit.
    pub residual_norm: f64,
    pub iterations: usize,
    pub linesearch_backtracks: usize,
    pub converged: bool,
    /// Objective `½‖R‖²` (LSPG) or `½‖ΦᵀR‖²` (Galerkin) after every iteration,
    /// starting with the value at `y0`.
    pub history: Vec<f64>,
}

/// Everything computed at a converged reduced solve that gradients need.
#[derive(Debug, Clone)]
pub struct RomEvaluation {
    pub mu: DVector<f64>,
    pub report: RomSolveReport,
    /// `w̄ + Φy`.
    pub state: DVector<f64>,
    pub residual: DVector<f64>,
    /// `(∂R/∂w) Φ`.
    pub jac_phi: DMatrix<f64>,
    /// `∂R/∂μ`.
    pub jac_param: DMatrix<f64>,
}

impl RomEvaluation {
    /// `½‖R‖²` at the reduced solution.
    pub fn indicator(&self) -> f64 {
        0.5 * self.residual.norm_squared()
    }

    /// Minimum-error reduced sensitivities from the stored Jacobians.
    pub fn minimum_error_sensitivities(&self) -> Result<DMatrix<f64>> {
        least_squares(&self.jac_phi, &(-&self.jac_param), LSQ_RANK_TOL)
    }

    /// `dF/dμ ≈ ∂F/∂μ + (∂y/∂μ)ᵀ Φᵀ (∂F/∂w)ᵀ` with the supplied reduced sensitivities.
    pub fn functional_gradient<F: Functional + ?Sized>(
        &self,
        functional: &F,
        basis: &DMatrix<f64>,
        reduced_sens: &DMatrix<f64>,
    ) -> DVector<f64> {
        let fw = functional.partial_state(&self.state, &self.mu);
        functional.partial_param(&self.state, &self.mu) + reduced_sens.tr_mul(&basis.tr_mul(&fw))
    }

    /// Gradient of `½‖R‖²`: `Rᵀ[(∂R/∂w)Φ (∂y/∂μ) + ∂R/∂μ]`.
    pub fn indicator_gradient(&self, reduced_sens: &DMatrix<f64>) -> DVector<f64> {
        let total = &self.jac_phi * reduced_sens + &self.jac_param;
        total.tr_mul(&self.residual)
    }
}

/// A reduced model: an affine trial space, a projection and the full model
/// whose residual it restricts.
pub struct RomInstance<'m, M: HdmModel + ?Sized> {
    model: &'m M,
    pub space: RomSpace,
    pub projection: Projection,
    pub options: RomSolveOptions,
}

impl<'m, M: HdmModel + ?Sized> RomInstance<'m, M> {
    pub fn new(model: &'m M, space: RomSpace, projection: Projection) -> Result<Self> {
        if space.state_dim() != model.state_dim() {
            return Err(Error::invalid(format!(
                "space dimension {} does not match model dimension {}",
                space.state_dim(),
                model.state_dim()
            )));
        }
        Ok(Self {
            model,
            space,
            projection,
            options: RomSolveOptions::default(),
        })
    }

    pub fn lspg(model: &'m M, space: RomSpace) -> Result<Self> {
        Self::new(model, space, Projection::Lspg)
    }

    pub fn model(&self) -> &M {
        self.model
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.space.combined
    }

    pub fn basis_size(&self) -> usize {
        self.space.basis_size()
    }

    pub fn reconstruct(&self, y: &DVector<f64>) -> DVector<f64> {
        self.space.reconstruct(y)
    }

    fn check_reduced(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.basis_size() {
            return Err(Error::invalid(format!(
                "reduced state has length {}, basis has {} columns",
                y.len(),
                self.basis_size()
            )));
        }
        Ok(())
    }

    /// `½‖R(w̄ + Φy, μ)‖²`.
    pub fn error_indicator(&self, y: &DVector<f64>, mu: &DVector<f64>) -> Result<f64> {
        self.check_reduced(y)?;
        Ok(0.5 * self.model.residual(&self.reconstruct(y), mu).norm_squared())
    }

    /// Solves the reduced equations at `mu` from `y0`.
    pub fn solve(&self, mu: &DVector<f64>, y0: &DVector<f64>) -> Result<RomSolveReport> {
        self.check_reduced(y0)?;
        if mu.len() != self.model.param_dim() {
            return Err(Error::invalid(format!(
                "parameter has length {}, model expects {}",
                mu.len(),
                self.model.param_dim()
            )));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial reduced state is not finite"));
        }
        match self.projection {
            Projection::Lspg => self.solve_gauss_newton(mu, y0),
            Projection::Galerkin => self.solve_galerkin_newton(mu, y0),
        }
    }

    fn residual_at(&self, y: &DVector<f64>, mu: &DVector<f64>) -> Result<DVector<f64>> {
        let r = self.model.residual(&self.reconstruct(y), mu);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState(
                "reduced solve produced a non-finite residual".into(),
            ));
        }
        Ok(r)
    }

    fn solve_gauss_newton(&self, mu: &DVector<f64>, y0: &DVector<f64>) -> Result<RomSolveReport> {
        let phi = self.basis();
        let opts = &self.options;
        let mut y = y0.clone();
        let mut r = self.residual_at(&y, mu)?;
        let mut value = 0.5 * r.norm_squared();
        let tol = opts.gradient_tol * r.norm().max(1.0);
        let mut report = RomSolveReport {
            y: y.clone(),
            residual_norm: value,
            iterations: 0,
            linesearch_backtracks: 0,
            converged: false,
            history: vec![value],
        };
        if phi.ncols() == 0 {
            report.converged = true;
            return Ok(report);
        }

        for iteration in 1..=opts.max_iterations + 1 {
            if value == 0.0 {
                report.converged = true;
                break;
            }
            let jac_phi = self.model.jacobian_state(&self.reconstruct(&y), mu) * phi;
            let gradient = jac_phi.tr_mul(&r);
            if gradient.norm() <= tol {
                report.converged = true;
                break;
            }
            if iteration > opts.max_iterations {
                break;
            }
            let direction = match ThinQr::new(&jac_phi, LSQ_RANK_TOL) {
                Ok(qr) => qr.solve_vec(&(-&r))?,
                Err(Error::RankDeficient { .. }) => -&gradient,
                Err(e) => return Err(e),
            };
            let step = match armijo_linesearch(
                |trial: &DVector<f64>| {
                    let rt = self.model.residual(&self.reconstruct(trial), mu);
                    Ok(0.5 * rt.norm_squared())
                },
                &y,
                &direction,
                &gradient,
                value,
                &opts.linesearch,
            ) {
                Ok(step) => step,
                Err(Error::LineSearchFailure { backtracks }) => {
                    report.linesearch_backtracks += backtracks;
                    break;
                }
                Err(e) => return Err(e),
            };
            report.linesearch_backtracks += step.backtracks;
            report.iterations = iteration;
            let step_norm = (&step.point - &y).norm();
            y = step.point;
            r = self.residual_at(&y, mu)?;
            value = 0.5 * r.norm_squared();
            report.history.push(value);
            report.y = y.clone();
            report.residual_norm = value;
            if step_norm < opts.step_tol {
                report.converged = true;
                break;
            }
        }
        Ok(report)
    }

    fn solve_galerkin_newton(&self, mu: &DVector<f64>, y0: &DVector<f64>) -> Result<RomSolveReport> {
        let phi = self.basis();
        let opts = &self.options;
        let projected = |y: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
            let r = self.residual_at(y, mu)?;
            let pr = phi.tr_mul(&r);
            Ok((r, pr))
        };
        let mut y = y0.clone();
        let (mut r, mut pr) = projected(&y)?;
        let mut merit = 0.5 * pr.norm_squared();
        let tol = opts.gradient_tol * pr.norm().max(1.0);
        let mut report = RomSolveReport {
            y: y.clone(),
            residual_norm: 0.5 * r.norm_squared(),
            iterations: 0,
            linesearch_backtracks: 0,
            converged: false,
            history: vec![merit],
        };
        if phi.ncols() == 0 {
            report.converged = true;
            return Ok(report);
        }
        for iteration in 1..=opts.max_iterations + 1 {
            if pr.norm() <= tol {
                report.converged = true;
                break;
            }
            if iteration > opts.max_iterations {
                break;
            }
            let reduced_jac = phi.tr_mul(&(self.model.jacobian_state(&self.reconstruct(&y), mu) * phi));
            let direction = -DenseLu::new(reduced_jac.clone())?.solve_vec(&pr)?;
            let gradient = reduced_jac.tr_mul(&pr);
            let step = match armijo_linesearch(
                |trial: &DVector<f64>| {
                    let rt = self.model.residual(&self.reconstruct(trial), mu);
                    Ok(0.5 * phi.tr_mul(&rt).norm_squared())
                },
                &y,
                &direction,
                &gradient,
                merit,
                &opts.linesearch,
            ) {
                Ok(step) => step,
                Err(Error::LineSearchFailure { backtracks }) => {
                    report.linesearch_backtracks += backtracks;
                    break;
                }
                Err(e) => return Err(e),
            };
            report.linesearch_backtracks += step.backtracks;
            report.iterations = iteration;
            let step_norm = (&step.point - &y).norm();
            y = step.point;
            (r, pr) = projected(&y)?;
            merit = 0.5 * pr.norm_squared();
            report.history.push(merit);
            report.y = y.clone();
            report.residual_norm = 0.5 * r.norm_squared();
            if step_norm < opts.step_tol {
                report.converged = true;
                break;
            }
        }
        Ok(report)
    }

    /// Solves from `y0 = 0` and gathers the Jacobian products at the solution.
    pub fn evaluate(&self, mu: &DVector<f64>) -> Result<RomEvaluation> {
        let y0 = DVector::zeros(self.basis_size());
        let report = self.solve(mu, &y0)?;
        let state = self.reconstruct(&report.y);
        let residual = self.model.residual(&state, mu);
        let jac_phi = self.model.jacobian_state(&state, mu) * self.basis();
        let jac_param = self.model.jacobian_param(&state, mu);
        Ok(RomEvaluation {
            mu: mu.clone(),
            report,
            state,
            residual,
            jac_phi,
            jac_param,
        })
    }

    /// Galerkin reduced sensitivities `−(ΦᵀJΦ)⁻¹ Φᵀ ∂R/∂μ`.
    pub fn reduced_sens_galerkin(&self, y: &DVector<f64>, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_reduced(y)?;
        let w = self.reconstruct(y);
        let phi = self.basis();
        let reduced_jac = phi.tr_mul(&(self.model.jacobian_state(&w, mu) * phi));
        let rhs = -phi.tr_mul(&self.model.jacobian_param(&w, mu));
        DenseLu::new(reduced_jac)?.solve(&rhs)
    }

    /// Exact LSPG reduced sensitivities including the residual-weighted
    /// second-order terms, formed by central differences of Jacobians along
    /// the basis directions and parameter axes.
    pub fn reduced_sens_lspg_full(&self, y: &DVector<f64>, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_reduced(y)?;
        let w = self.reconstruct(y);
        let phi = self.basis();
        let k = phi.ncols();
        let np = mu.len();
        let r = self.model.residual(&w, mu);
        let jac = self.model.jacobian_state(&w, mu);
        let jac_phi = &jac * phi;
        let jac_mu = self.model.jacobian_param(&w, mu);

        let mut hess_ww = jac_phi.tr_mul(&jac_phi);
        let mut hess_wmu = jac_phi.tr_mul(&jac_mu);

        if r.iter().any(|v| *v != 0.0) {
            let hw = 1e-6 * w.amax().max(1.0);
            for b in 0..k {
                let dir = phi.column(b);
                let plus = self.model.jacobian_state(&(&w + dir * hw), mu);
                let minus = self.model.jacobian_state(&(&w - dir * hw), mu);
                // Column b of Σ_j R_j Φᵀ ∂²R_j/∂w∂w Φ.
                let d_jac_t_r = (plus - minus).tr_mul(&r) / (2.0 * hw);
                let col = phi.tr_mul(&d_jac_t_r);
                for a in 0..k {
                    hess_ww[(a, b)] += col[a];
                }
            }
            for i in 0..np {
                let hm = 1e-6 * mu[i].abs().max(1.0);
                let mut mp = mu.clone();
                mp[i] += hm;
                let mut mm = mu.clone();
                mm[i] -= hm;
                let dj = (self.model.jacobian_state(&w, &mp) - self.model.jacobian_state(&w, &mm))
                    / (2.0 * hm);
                let col = phi.tr_mul(&dj.tr_mul(&r));
                for a in 0..k {
                    hess_wmu[(a, i)] += col[a];
                }
            }
        }
        DenseLu::new(hess_ww)?.solve(&(-hess_wmu))
    }

    /// Minimum-error reduced sensitivities: per parameter,
    /// `argmin_a ‖∂R/∂μ_j + (∂R/∂w)Φ a‖₂`, solved by QR.
    pub fn reduced_sens_minerr(&self, y: &DVector<f64>, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_reduced(y)?;
        let w = self.reconstruct(y);
        let jac_phi = self.model.jacobian_state(&w, mu) * self.basis();
        let rhs = -self.model.jacobian_param(&w, mu);
        least_squares(&jac_phi, &rhs, LSQ_RANK_TOL)
    }
}
