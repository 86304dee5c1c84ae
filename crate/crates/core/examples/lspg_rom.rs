//! Build an LSPG reduced model from a handful of Burgers samples, then
//! compare reduced and full solutions away from the training points.

use progrom::basis::{RomSpace, DEFAULT_RANK_TOLERANCE};
use progrom::hdm::{sample_hdm, solve_hdm, BurgersModel, HdmModel, InverseDesignObjective, SolverOptions};
use progrom::rom::RomInstance;
use progrom::{DMatrix, DVector};

fn main() -> progrom::Result<()> {
    let model = BurgersModel::default();
    let opts = SolverOptions::default();
    let objective = InverseDesignObjective::new(DVector::zeros(model.state_dim()));
    let train = [[0.5, 0.0, 0.0, 0.0], [0.8, 0.2, -0.2, 0.3], [0.4, -0.2, 0.2, -0.3]];
    let mut states = Vec::new();
    let mut sens = Vec::new();
    for mu in train {
        let mu = DVector::from_column_slice(&mu);
        let (sample, _) = sample_hdm(&model, &objective, &mu, &model.initial_guess(&mu), &opts)?;
        states.push(sample.state);
        sens.extend(sample.sensitivities.column_iter().map(|c| c.into_owned()));
    }
    let reference = states[0].clone();
    let offsets = DMatrix::from_columns(&states.iter().map(|w| w - &reference).collect::<Vec<_>>());
    let space = RomSpace::from_snapshots(reference, &offsets, &DMatrix::from_columns(&sens), DEFAULT_RANK_TOLERANCE)?;
    let rom = RomInstance::lspg(&model, space)?;
    println!("reduced basis size {}", rom.basis_size());

    for mu in [[0.8, 0.2, -0.2, 0.3], [0.6, 0.1, -0.1, 0.1], [0.9, -0.25, 0.4, 0.5]] {
        let mu = DVector::from_column_slice(&mu);
        let eval = rom.evaluate(&mu)?;
        let full = solve_hdm(&model, &mu, &model.initial_guess(&mu), &opts)?.state;
        let err = (&eval.state - &full).norm() / full.norm();
        println!(
            "mu = {:?}: {} Gauss-Newton iterations, indicator {:.3e}, state error {:.3e}",
            mu.as_slice(),
            eval.report.iterations,
            eval.indicator(),
            err
        );
    }
    Ok(())
}
