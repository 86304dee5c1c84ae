use nalgebra::{DMatrix, DVector};

use super::{Functional, HdmModel};
use crate::linalg::DenseLu;
use crate::{Error, Result};

/// State sensitivities `∂w/∂μ = −(∂R/∂w)⁻¹ ∂R/∂μ` by the direct method:
/// one LU factorization, `n_p` solves and one refinement sweep.
pub fn hdm_sensitivities<M: HdmModel + ?Sized>(
    model: &M,
    w: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    model.check_dims(w, mu)?;
    let jac = model.jacobian_state(w, mu);
    let rhs = -model.jacobian_param(w, mu);
    let lu = DenseLu::new(jac.clone())?;
    let mut s = lu.solve(&rhs)?;
    let defect = &rhs - &jac * &s;
    s += lu.solve(&defect)?;
    Ok(s)
}

/// Total derivative `dF/dμ = ∂F/∂μ + Sᵀ (∂F/∂w)ᵀ` given state sensitivities `S`.
pub fn gradient_direct<M: HdmModel + ?Sized, F: Functional + ?Sized>(
    model: &M,
    functional: &F,
    w: &DVector<f64>,
    mu: &DVector<f64>,
    sensitivities: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    model.check_dims(w, mu)?;
    if sensitivities.shape() != (model.state_dim(), model.param_dim()) {
        return Err(Error::invalid(format!(
            "sensitivity matrix is {}x{}, expected {}x{}",
            sensitivities.nrows(),
            sensitivities.ncols(),
            model.state_dim(),
            model.param_dim()
        )));
    }
    Ok(functional.partial_param(w, mu) + sensitivities.tr_mul(&functional.partial_state(w, mu)))
}

/// Total derivative by the adjoint method: one transposed solve
/// `(∂R/∂w)ᵀ λ = (∂F/∂w)ᵀ`, then `dF/dμ = ∂F/∂μ − (∂R/∂μ)ᵀ λ`.
pub fn gradient_adjoint<M: HdmModel + ?Sized, F: Functional + ?Sized>(
    model: &M,
    functional: &F,
    w: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<DVector<f64>> {
    model.check_dims(w, mu)?;
    let load = functional.partial_state(w, mu);
    let partial = functional.partial_param(w, mu);
    if load.iter().all(|v| *v == 0.0) {
        return Ok(partial);
    }
    let jac_t = model.jacobian_state(w, mu).transpose();
    let lu = DenseLu::new(jac_t.clone())?;
    let mut lambda = lu.solve_vec(&load)?;
    let defect = &load - &jac_t * &lambda;
    lambda += lu.solve_vec(&defect)?;
    Ok(partial - model.jacobian_param(w, mu).tr_mul(&lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdm::{
        solve_hdm, BurgersModel, InverseDesignObjective, LinearParametricModel, SolverOptions,
    };

    #[test]
    fn identity_operator_sensitivities_equal_load_matrix() {
        let b = DMatrix::from_fn(5, 2, |i, j| (i + 2 * j) as f64 * 0.3 - 0.5);
        let model =
            LinearParametricModel::new(DMatrix::identity(5, 5), DVector::zeros(5), b.clone())
                .unwrap();
        let mu = DVector::from_column_slice(&[0.4, -0.7]);
        let w = model.load(&mu);
        let s = hdm_sensitivities(&model, &w, &mu).unwrap();
        assert_eq!(s, b);
    }

    #[test]
    fn linear_chain_rule() {
        let b = DMatrix::from_fn(4, 2, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let model =
            LinearParametricModel::new(DMatrix::identity(4, 4), DVector::zeros(4), b.clone())
                .unwrap();
        let mu = DVector::from_column_slice(&[1.0, -2.0]);
        let w = model.load(&mu);
        let objective = InverseDesignObjective::new(DVector::zeros(4));
        let s = hdm_sensitivities(&model, &w, &mu).unwrap();
        let g = gradient_direct(&model, &objective, &w, &mu, &s).unwrap();
        assert!((g - b.tr_mul(&w)).norm() < 1e-14);
    }

    /// Depends on μ only; the adjoint load is zero.
    struct ParamOnly;

    impl Functional for ParamOnly {
        fn value(&self, _w: &DVector<f64>, mu: &DVector<f64>) -> f64 {
            mu.iter().map(|m| m * m * m).sum()
        }
        fn partial_state(&self, w: &DVector<f64>, _mu: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(w.len())
        }
        fn partial_param(&self, _w: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
            mu.map(|m| 3.0 * m * m)
        }
    }

    #[test]
    fn state_independent_functional_has_partial_gradient() {
        let model = BurgersModel::new(32, 0.05, 2);
        let mu = DVector::from_column_slice(&[0.3, -0.6]);
        let w = solve_hdm(&model, &mu, &model.initial_guess(&mu), &SolverOptions::default())
            .unwrap()
            .state;
        let g = gradient_adjoint(&model, &ParamOnly, &w, &mu).unwrap();
        assert_eq!(g, ParamOnly.partial_param(&w, &mu));
    }

    #[test]
    fn direct_and_adjoint_agree_on_linear_model() {
        let model = LinearParametricModel::random(20, 3, 4);
        let mu = DVector::from_column_slice(&[0.1, 0.2, -0.3]);
        let w = solve_hdm(&model, &mu, &DVector::zeros(20), &SolverOptions::default())
            .unwrap()
            .state;
        let objective = InverseDesignObjective::new(DVector::from_element(20, 0.25));
        let s = hdm_sensitivities(&model, &w, &mu).unwrap();
        let direct = gradient_direct(&model, &objective, &w, &mu, &s).unwrap();
        let adjoint = gradient_adjoint(&model, &objective, &w, &mu).unwrap();
        assert!((&direct - &adjoint).norm() <= 1e-10 * direct.norm().max(1.0));
    }

    #[test]
    fn sensitivity_defining_equation_residual() {
        let model = BurgersModel::default();
        let mu = DVector::from_column_slice(&[0.2, 0.1, -0.3, 0.05]);
        let w = solve_hdm(&model, &mu, &model.initial_guess(&mu), &SolverOptions::default())
            .unwrap()
            .state;
        let s = hdm_sensitivities(&model, &w, &mu).unwrap();
        let defect = model.jacobian_state(&w, &mu) * &s + model.jacobian_param(&w, &mu);
        assert!(defect.abs().max() < 1e-10);
    }

    fn burgers_state(model: &BurgersModel, mu: &DVector<f64>) -> DVector<f64> {
        solve_hdm(model, mu, &model.initial_guess(mu), &SolverOptions::default())
            .unwrap()
            .state
    }

    fn check_sensitivities_against_fd(mu: DVector<f64>, h: f64) {
        let model = BurgersModel::default();
        let w = burgers_state(&model, &mu);
        let s = hdm_sensitivities(&model, &w, &mu).unwrap();
        for j in 0..4 {
            let mut plus = mu.clone();
            plus[j] += h;
            let mut minus = mu.clone();
            minus[j] -= h;
            let fd = (burgers_state(&model, &plus) - burgers_state(&model, &minus)) / (2.0 * h);
            let col = s.column(j);
            let rel = (&fd - col).norm() / col.norm();
            assert!(rel < 1e-4, "column {j}: relative error {rel:e}");
        }
    }

    #[test]
    fn burgers_sensitivities_match_finite_differences() {
        check_sensitivities_against_fd(DVector::from_column_slice(&[0.625, 0.0, 0.0, 0.0]), 1e-5);
        check_sensitivities_against_fd(DVector::from_column_slice(&[0.3, 0.4, -0.2, -0.3]), 1e-5);
    }

    #[test]
    fn burgers_sensitivities_at_zero_forcing() {
        // The interior shock makes w(μ) strongly curved here (|S| ~ 1e4), so
        // the O(h²) truncation error needs a smaller step.
        check_sensitivities_against_fd(DVector::zeros(4), 1e-6);
    }

    #[test]
    fn burgers_gradient_matches_finite_differences() {
        let model = BurgersModel::default();
        let target = burgers_state(&model, &DVector::from_column_slice(&[0.1, -0.2, 0.05, 0.1]));
        let objective = InverseDesignObjective::new(target);
        let mu = DVector::from_column_slice(&[0.3, 0.1, -0.2, 0.15]);
        let w = burgers_state(&model, &mu);
        let s = hdm_sensitivities(&model, &w, &mu).unwrap();
        let direct = gradient_direct(&model, &objective, &w, &mu, &s).unwrap();
        let adjoint = gradient_adjoint(&model, &objective, &w, &mu).unwrap();
        assert!((&direct - &adjoint).norm() <= 1e-9 * direct.norm());
        let h = 1e-5;
        let fd = DVector::from_fn(4, |j, _| {
            let mut plus = mu.clone();
            plus[j] += h;
            let mut minus = mu.clone();
            minus[j] -= h;
            let jp = objective.value(&burgers_state(&model, &plus), &plus);
            let jm = objective.value(&burgers_state(&model, &minus), &minus);
            (jp - jm) / (2.0 * h)
        });
        let rel = (&fd - &direct).norm() / direct.norm();
        assert!(rel < 1e-5, "relative error {rel:e}");
    }
}
