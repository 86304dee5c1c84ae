//! State sensitivities and objective gradients by the direct and adjoint
//! methods, checked against central finite differences.

use progrom::hdm::{
    gradient_adjoint, gradient_direct, hdm_sensitivities, solve_hdm, BurgersModel, Functional, HdmModel,
    InverseDesignObjective, SolverOptions,
};
use progrom::DVector;

fn main() -> progrom::Result<()> {
    let model = BurgersModel::default();
    let opts = SolverOptions::default();
    let solve = |mu: &DVector<f64>| solve_hdm(&model, mu, &model.initial_guess(mu), &opts).map(|s| s.state);

    let target = solve(&DVector::from_column_slice(&[0.45, 0.2, -0.1, -0.15]))?;
    let objective = InverseDesignObjective::new(target);
    let mu = DVector::from_column_slice(&[0.7, -0.1, 0.2, 0.3]);
    let w = solve(&mu)?;
    let s = hdm_sensitivities(&model, &w, &mu)?;
    let direct = gradient_direct(&model, &objective, &w, &mu, &s)?;
    let adjoint = gradient_adjoint(&model, &objective, &w, &mu)?;

    let h = 1e-5;
    let fd = DVector::from_fn(mu.len(), |j, _| {
        let mut p = mu.clone();
        let mut m = mu.clone();
        p[j] += h;
        m[j] -= h;
        let (wp, wm) = (solve(&p).unwrap(), solve(&m).unwrap());
        (objective.value(&wp, &p) - objective.value(&wm, &m)) / (2.0 * h)
    });
    println!("direct  {:?}", direct.as_slice());
    println!("adjoint {:?}", adjoint.as_slice());
    println!("fd      {:?}", fd.as_slice());
    println!("|direct - adjoint| / |direct| = {:.2e}", (&direct - &adjoint).norm() / direct.norm());
    println!("|direct - fd| / |direct|      = {:.2e}", (&direct - &fd).norm() / direct.norm());
    Ok(())
}
