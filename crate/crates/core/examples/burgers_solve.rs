//! Solve the steady viscous Burgers problem at a few parameters and print
//! the Newton history and a coarse profile.

use progrom::hdm::{solve_hdm, BurgersModel, HdmModel, SolverOptions};
use progrom::DVector;

fn main() -> progrom::Result<()> {
    let model = BurgersModel::default();
    println!("N = {}, viscosity = {}, domain = {:?}", model.state_dim(), model.viscosity(), model.domain());
    for mu in [[0.625, 0.0, 0.0, 0.0], [0.45, 0.2, -0.1, -0.15], [1.0, 0.25, 0.5, -0.5]] {
        let mu = DVector::from_column_slice(&mu);
        let solve = solve_hdm(&model, &mu, &model.initial_guess(&mu), &SolverOptions::default())?;
        println!(
            "mu = {:?}: {} iterations ({} Newton, {} continuation), |R| {:.2e} -> {:.2e}",
            mu.as_slice(),
            solve.iterations,
            solve.newton_steps,
            solve.continuation_steps,
            solve.initial_residual_norm,
            solve.residual_norm
        );
        let stride = model.state_dim() / 8;
        let profile: Vec<String> = solve.state.iter().step_by(stride).map(|u| format!("{u:+.4}")).collect();
        println!("  u = [{}]", profile.join(", "));
    }
    Ok(())
}
