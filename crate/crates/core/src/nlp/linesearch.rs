use nalgebra::DVector;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoParams {
    pub sufficient_decrease: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            sufficient_decrease: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchStep {
    pub alpha: f64,
    pub point: DVector<f64>,
    pub value: f64,
    pub backtracks: usize,
    /// The supplied direction was not a descent direction and `−g` was used.
    pub reset_to_steepest: bool,
}

/// Backtracking line search on `f(x + α d)` with the Armijo condition
/// `f(x + α d) ≤ f(x) + c α gᵀd`, trying `α = 1, β, β², …`.
///
/// Non-finite trial values count as insufficient decrease.
pub fn armijo_linesearch<F>(
    mut f: F,
    x: &DVector<f64>,
    direction: &DVector<f64>,
    gradient: &DVector<f64>,
    fx: f64,
    params: &ArmijoParams,
) -> Result<LineSearchStep>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
{
    if x.len() != direction.len() || x.len() != gradient.len() {
        return Err(Error::invalid("line search vectors have mismatched lengths"));
    }
    if !fx.is_finite() {
        return Err(Error::InvalidState(format!(
            "line search started from a non-finite value {fx}"
        )));
    }
    let mut d = direction.clone();
    let mut slope = gradient.dot(&d);
    let mut reset = false;
    if !(slope < 0.0) {
        d = -gradient;
        slope = -gradient.norm_squared();
        reset = true;
        if !(slope < 0.0) {
            return Err(Error::LineSearchFailure { backtracks: 0 });
        }
    }
    let mut alpha = 1.0;
    for backtracks in 0..=params.max_backtracks {
        let trial = x + &d * alpha;
        let value = f(&trial)?;
        if value.is_finite() && value <= fx + params.sufficient_decrease * alpha * slope {
            return Ok(LineSearchStep {
                alpha,
                point: trial,
                value,
                backtracks,
                reset_to_steepest: reset,
            });
        }
        alpha *= params.backtrack;
    }
    Err(Error::LineSearchFailure {
        backtracks: params.max_backtracks,
    })
}
