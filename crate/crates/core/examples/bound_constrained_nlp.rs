//! The penalty optimizer on a bound- and inequality-constrained Rosenbrock
//! problem, with one component pinned.

use progrom::nlp::{nlp_solve, Evaluation, NlpProblem};
use progrom::{DMatrix, DVector};

fn main() -> progrom::Result<()> {
    // min (1-x)^2 + 100 (y-x^2)^2 + z^2  s.t.  x^2 + y^2 - 0.8 <= 0,  0 <= x, y <= 2,  z = 0.5
    let mut functions = |v: &DVector<f64>, need_gradient: bool| -> progrom::Result<Evaluation> {
        let (x, y, z) = (v[0], v[1], v[2]);
        let objective = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2) + z * z;
        let constraints = DVector::from_element(1, x * x + y * y - 0.8);
        let (gradient, constraint_jacobian) = if need_gradient {
            let g = DVector::from_column_slice(&[
                -2.0 * (1.0 - x) - 400.0 * x * (y - x * x),
                200.0 * (y - x * x),
                2.0 * z,
            ]);
            (Some(g), Some(DMatrix::from_row_slice(1, 3, &[2.0 * x, 2.0 * y, 0.0])))
        } else {
            (None, None)
        };
        Ok(Evaluation { objective, constraints, gradient, constraint_jacobian })
    };
    let problem = NlpProblem::new(vec![0.0, 0.0, -1.0], vec![2.0, 2.0, 1.0]).with_fixed(vec![(2, 0.5)]);
    let result = nlp_solve(&problem, &mut functions, &DVector::from_column_slice(&[0.1, 0.1, 0.0]))?;
    println!("status {:?} after {} iterations", result.status, result.iterations);
    println!("x* = {:?}", result.x_star.as_slice());
    println!(
        "f* = {:.8}, KKT residual {:.2e}, violation {:.2e}",
        result.objective_value, result.kkt_residual, result.constraint_violation
    );
    Ok(())
}
