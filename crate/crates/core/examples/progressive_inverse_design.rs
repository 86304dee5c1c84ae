//! Recover the source parameters of a Burgers solution with the progressive
//! ROM-constrained optimizer, printing one line per trust-region subproblem.

use progrom::driver::{progressive_optimize, ProgressiveOptions};
use progrom::hdm::{solve_hdm, BurgersModel, HdmModel, InverseDesignObjective, SolverOptions};
use progrom::DVector;

fn main() -> progrom::Result<()> {
    let model = BurgersModel::default();
    let domain = model.domain();
    let target_mu = DVector::from_column_slice(&[0.45, 0.2, -0.1, -0.15]);
    let target = solve_hdm(&model, &target_mu, &model.initial_guess(&target_mu), &SolverOptions::default())?.state;
    let objective = InverseDesignObjective::new(target);
    let mu0 = DVector::from_fn(domain.dim(), |i, _| 0.5 * (domain.lower[i] + domain.upper[i]));

    let outcome = progressive_optimize(&model, &objective, &mu0, &ProgressiveOptions::default())?;
    println!("{:>3} {:>10} {:>10} {:>5} {:>12} {:>12} {:>10}", "j", "epsilon", "rho", "k", "J start", "J new", "indicator");
    for r in &outcome.log.subproblems {
        println!(
            "{:>3} {:>10.3e} {:>10} {:>5} {:>12.4e} {:>12} {:>10.3e}",
            r.index,
            r.epsilon,
            r.rho.map_or("-".into(), |v| format!("{v:.3}")),
            r.basis_size,
            r.objective_start,
            r.objective_star.map_or("-".into(), |v| format!("{v:.4e}")),
            r.indicator_star
        );
    }
    let err = (&outcome.mu_best - &target_mu).norm() / target_mu.norm();
    println!("status {}, {} full-model solves", outcome.status.name(), outcome.log.summary.hdm_evaluations);
    println!("mu* = {:?}, relative error {err:.2e}", outcome.mu_best.as_slice());
    Ok(())
}
