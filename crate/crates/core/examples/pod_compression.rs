//! Compress Burgers steady states over a parameter sweep with POD and watch
//! the projection error fall as the basis grows.

use progrom::basis::{pod, DEFAULT_RANK_TOLERANCE};
use progrom::hdm::{solve_hdm, BurgersModel, HdmModel, SolverOptions};
use progrom::{DMatrix, DVector};

fn main() -> progrom::Result<()> {
    let model = BurgersModel::default();
    let opts = SolverOptions::default();
    let mut columns = Vec::new();
    for k in 0..12 {
        let t = k as f64 / 11.0;
        let mu = DVector::from_column_slice(&[0.3 + 0.6 * t, 0.2 * (3.0 * t).sin(), -0.1 * t, 0.3 * t - 0.15]);
        columns.push(solve_hdm(&model, &mu, &model.initial_guess(&mu), &opts)?.state);
    }
    let snapshots = DMatrix::from_columns(&columns);
    let probe_mu = DVector::from_column_slice(&[0.55, 0.05, -0.05, 0.0]);
    let probe = solve_hdm(&model, &probe_mu, &model.initial_guess(&probe_mu), &opts)?.state;

    for k in 1..=8 {
        let basis = pod(&snapshots, k, DEFAULT_RANK_TOLERANCE)?.basis;
        let err = (&probe - &basis * basis.tr_mul(&probe)).norm() / probe.norm();
        println!("k = {k}: unseen-state projection error {err:.3e}");
    }
    Ok(())
}
