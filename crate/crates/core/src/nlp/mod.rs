//! Smooth bound-constrained optimization with inequality constraints.
//!
//! Inequalities `g(x) ≤ 0` are handled by an exterior quadratic penalty
//! `f + (σ/2)·Σ max(0, gᵢ)²` whose weight grows tenfold between stages.
//! Each stage is minimized by a projected BFGS method that keeps every iterate
//! inside the box and never moves fixed components. Intermediate iterates may
//! violate the inequalities.

mod linesearch;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use linesearch::{armijo_linesearch, ArmijoParams, LineSearchStep};

use crate::{Error, Result};

/// Values returned by one call of [`NlpFunctions::evaluate`].
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    /// `g(x)`, feasible when every entry is `≤ 0`.
    pub constraints: DVector<f64>,
    /// `∇f`, required when the caller asked for gradients.
    pub gradient: Option<DVector<f64>>,
    /// Row `i` holds `∇gᵢ`.
    pub constraint_jacobian: Option<DMatrix<f64>>,
}

impl Evaluation {
    pub fn unconstrained(objective: f64, gradient: Option<DVector<f64>>) -> Self {
        let n = gradient.as_ref().map_or(0, |g| g.len());
        Self {
            objective,
            constraints: DVector::zeros(0),
            gradient,
            constraint_jacobian: Some(DMatrix::zeros(0, n)),
        }
    }

    pub fn violation(&self) -> f64 {
        self.constraints.iter().fold(0.0_f64, |m, g| m.max(*g))
    }
}

/// Objective and constraint callbacks. The solver asks for gradients only at
/// accepted iterates, so implementations that cache expensive state can avoid
/// recomputation when the same point is evaluated twice.
pub trait NlpFunctions {
    fn evaluate(&mut self, x: &DVector<f64>, need_gradient: bool) -> Result<Evaluation>;
}

impl<F> NlpFunctions for F
where
    F: FnMut(&DVector<f64>, bool) -> Result<Evaluation>,
{
    fn evaluate(&mut self, x: &DVector<f64>, need_gradient: bool) -> Result<Evaluation> {
        self(x, need_gradient)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpProblem {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Components pinned to the given values.
    pub fixed: Vec<(usize, f64)>,
    /// Total inner iterations over all penalty stages.
    pub iteration_cap: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
}

impl NlpProblem {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            lower,
            upper,
            fixed: Vec::new(),
            iteration_cap: 500,
            feasibility_tol: 1e-6,
            optimality_tol: 1e-9,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
        }
    }

    pub fn unbounded(n: usize) -> Self {
        Self::new(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    pub fn with_fixed(mut self, fixed: Vec<(usize, f64)>) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn with_iteration_cap(mut self, cap: usize) -> Self {
        self.iteration_cap = cap;
        self
    }

    pub fn with_tolerances(mut self, optimality: f64, feasibility: f64) -> Self {
        self.optimality_tol = optimality;
        self.feasibility_tol = feasibility;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.upper.len() != n {
            return Err(Error::invalid(format!(
                "bounds have lengths {} and {}",
                n,
                self.upper.len()
            )));
        }
        for i in 0..n {
            if self.lower[i].is_nan() || self.upper[i].is_nan() || self.lower[i] > self.upper[i] {
                return Err(Error::invalid(format!(
                    "bound {i} is inconsistent: [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        for &(i, v) in &self.fixed {
            if i >= n {
                return Err(Error::invalid(format!("fixed index {i} out of range for dimension {n}")));
            }
            if !(v >= self.lower[i] && v <= self.upper[i]) {
                return Err(Error::invalid(format!(
                    "fixed value {v} for component {i} lies outside [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        if !(self.feasibility_tol > 0.0 && self.optimality_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.initial_penalty > 0.0 && self.penalty_growth > 1.0) {
            return Err(Error::invalid("penalty must start positive and grow"));
        }
        Ok(())
    }

    /// Box with fixed components collapsed to their pinned values.
    fn effective_box(&self) -> (DVector<f64>, DVector<f64>) {
        let mut lo = DVector::from_column_slice(&self.lower);
        let mut hi = DVector::from_column_slice(&self.upper);
        for &(i, v) in &self.fixed {
            lo[i] = v;
            hi[i] = v;
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlpStatus {
    Optimal,
    IterationCap,
    LinesearchFailure,
}

#[derive(Debug, Clone)]
pub struct NlpResult {
    pub x_star: DVector<f64>,
    pub objective_value: f64,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub iterations: usize,
    pub status: NlpStatus,
    pub penalty: f64,
    /// Merit value after each accepted inner iteration.
    pub merit_history: Vec<f64>,
}

struct Point {
    x: DVector<f64>,
    eval: Evaluation,
}

impl Point {
    fn merit(&self, sigma: f64) -> f64 {
        merit_value(&self.eval, sigma)
    }

    fn merit_gradient(&self, sigma: f64) -> Result<DVector<f64>> {
        let mut g = self
            .eval
            .gradient
            .clone()
            .ok_or_else(|| Error::InvalidState("objective gradient was not provided".into()))?;
        if self.eval.constraints.iter().any(|c| *c > 0.0) {
            let jac = self
                .eval
                .constraint_jacobian
                .as_ref()
                .ok_or_else(|| Error::InvalidState("constraint gradients were not provided".into()))?;
            for (i, c) in self.eval.constraints.iter().enumerate() {
                if *c > 0.0 {
                    g.axpy(sigma * c, &jac.row(i).transpose(), 1.0);
                }
            }
        }
        Ok(g)
    }
}

fn merit_value(eval: &Evaluation, sigma: f64) -> f64 {
    let penalty: f64 = eval.constraints.iter().map(|c| c.max(0.0).powi(2)).sum();
    eval.objective + 0.5 * sigma * penalty
}

fn check_evaluation(eval: &Evaluation, n: usize, gradients: bool) -> Result<()> {
    if !eval.objective.is_finite() || eval.constraints.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidState("objective or constraint evaluated to a non-finite value".into()));
    }
    if gradients {
        match &eval.gradient {
            Some(g) if g.len() == n && g.iter().all(|v| v.is_finite()) => {}
            Some(_) => return Err(Error::InvalidState("objective gradient is malformed or non-finite".into())),
            None => return Err(Error::InvalidState("objective gradient was not provided".into())),
        }
        if eval.constraints.len() > 0 {
            match &eval.constraint_jacobian {
                Some(j) if j.shape() == (eval.constraints.len(), n) && j.iter().all(|v| v.is_finite()) => {}
                _ => return Err(Error::InvalidState("constraint gradients are malformed or non-finite".into())),
            }
        }
    }
    Ok(())
}

fn project(x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| x[i].max(lo[i]).min(hi[i]))
}

/// `‖P(x − g) − x‖∞`.
fn projected_gradient_norm(x: &DVector<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..x.len() {
        let p = (x[i] - g[i]).max(lo[i]).min(hi[i]);
        m = m.max((p - x[i]).abs());
    }
    m
}

/// Components that may move: not pinned and not held at a bound by the gradient.
fn free_mask(x: &DVector<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Vec<bool> {
    (0..x.len())
        .map(|i| {
            if lo[i] == hi[i] {
                return false;
            }
            let at_lower = x[i] <= lo[i] && g[i] > 0.0;
            let at_upper = x[i] >= hi[i] && g[i] < 0.0;
            !(at_lower || at_upper)
        })
        .collect()
}

struct Incumbent {
    x: DVector<f64>,
    objective: f64,
    violation: f64,
    kkt: f64,
}

impl Incumbent {
    fn better(&self, objective: f64, violation: f64, feas_tol: f64) -> bool {
        let self_feasible = self.violation <= feas_tol;
        let other_feasible = violation <= feas_tol;
        match (self_feasible, other_feasible) {
            (true, true) => objective < self.objective,
            (false, true) => true,
            (true, false) => false,
            (false, false) => violation < self.violation,
        }
    }
}

/// Minimizes the problem from `x0` (projected onto the box first).
pub fn nlp_solve<F: NlpFunctions + ?Sized>(
    problem: &NlpProblem,
    functions: &mut F,
    x0: &DVector<f64>,
) -> Result<NlpResult> {
    problem.validate()?;
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::invalid(format!("x0 has length {}, problem has dimension {n}", x0.len())));
    }
    if x0.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("x0 contains NaN"));
    }
    let (lo, hi) = problem.effective_box();
    let params = ArmijoParams::default();

    let x = project(x0, &lo, &hi);
    let eval = functions.evaluate(&x, true)?;
    check_evaluation(&eval, n, true)?;
    let mut current = Point { x, eval };

    let mut sigma = problem.initial_penalty;
    let mut iterations = 0usize;
    let mut merit_history = Vec::new();
    let mut grad = current.merit_gradient(sigma)?;
    let mut kkt = projected_gradient_norm(&current.x, &grad, &lo, &hi);
    let mut best = Incumbent {
        x: current.x.clone(),
        objective: current.eval.objective,
        violation: current.eval.violation(),
        kkt,
    };

    let finish = |point: &Point, kkt: f64, iterations, status, sigma, history: Vec<f64>| NlpResult {
        x_star: point.x.clone(),
        objective_value: point.eval.objective,
        kkt_residual: kkt,
        constraint_violation: point.eval.violation(),
        iterations,
        status,
        penalty: sigma,
        merit_history: history,
    };
    let from_best = |best: &Incumbent, iterations, status, sigma, history: Vec<f64>| NlpResult {
        x_star: best.x.clone(),
        objective_value: best.objective,
        kkt_residual: best.kkt,
        constraint_violation: best.violation,
        iterations,
        status,
        penalty: sigma,
        merit_history: history,
    };

    loop {
        // Inner projected BFGS on the current penalty stage.
        let mut h_inv: Option<DMatrix<f64>> = None;
        loop {
            if kkt <= problem.optimality_tol {
                break;
            }
            if iterations >= problem.iteration_cap {
                return Ok(from_best(&best, iterations, NlpStatus::IterationCap, sigma, merit_history));
            }
            let merit = current.merit(sigma);
            let mask = free_mask(&current.x, &grad, &lo, &hi);
            let step = match projected_search(
                functions, &current, &grad, h_inv.as_ref(), &mask, &lo, &hi, sigma, merit, &params,
            )? {
                Some(step) => Some(step),
                None if h_inv.is_some() => {
                    h_inv = None;
                    projected_search(functions, &current, &grad, None, &mask, &lo, &hi, sigma, merit, &params)?
                }
                None => None,
            };
            let Some(trial_x) = step else {
                return Ok(from_best(&best, iterations, NlpStatus::LinesearchFailure, sigma, merit_history));
            };

            let eval = functions.evaluate(&trial_x, true)?;
            check_evaluation(&eval, n, true)?;
            let next = Point { x: trial_x, eval };
            let next_grad = next.merit_gradient(sigma)?;
            iterations += 1;

            let s = &next.x - &current.x;
            let y = &next_grad - &grad;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
                let h = h_inv.take().unwrap_or_else(|| DMatrix::identity(n, n) * (sy / y.norm_squared()));
                h_inv = Some(bfgs_inverse_update(&h, &s, &y, sy));
            }

            current = next;
            grad = next_grad;
            kkt = projected_gradient_norm(&current.x, &grad, &lo, &hi);
            merit_history.push(current.merit(sigma));
            let violation = current.eval.violation();
            if best.better(current.eval.objective, violation, problem.feasibility_tol) {
                best = Incumbent {
                    x: current.x.clone(),
                    objective: current.eval.objective,
                    violation,
                    kkt,
                };
            }
        }

        if current.eval.violation() <= problem.feasibility_tol {
            return Ok(finish(&current, kkt, iterations, NlpStatus::Optimal, sigma, merit_history));
        }
        sigma *= problem.penalty_growth;
        if !sigma.is_finite() || sigma > 1e20 {
            return Ok(from_best(&best, iterations, NlpStatus::IterationCap, sigma, merit_history));
        }
        grad = current.merit_gradient(sigma)?;
        kkt = projected_gradient_norm(&current.x, &grad, &lo, &hi);
    }
}

fn bfgs_inverse_update(h: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, sy: f64) -> DMatrix<f64> {
    let rho = 1.0 / sy;
    let hy = h * y;
    let yhy = y.dot(&hy);
    // (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, expanded.
    let mut out = h.clone();
    out -= (&hy * s.transpose() + s * hy.transpose()) * rho;
    out += (s * s.transpose()) * (rho * rho * yhy + rho);
    out
}

/// Projected Armijo search along the quasi-Newton direction restricted to the
/// free components. Returns `None` when no step gives sufficient decrease.
#[allow(clippy::too_many_arguments)]
fn projected_search<F: NlpFunctions + ?Sized>(
    functions: &mut F,
    current: &Point,
    grad: &DVector<f64>,
    h_inv: Option<&DMatrix<f64>>,
    mask: &[bool],
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    sigma: f64,
    merit: f64,
    params: &ArmijoParams,
) -> Result<Option<DVector<f64>>> {
    let n = grad.len();
    let masked_grad = DVector::from_fn(n, |i, _| if mask[i] { grad[i] } else { 0.0 });
    let mut direction = match h_inv {
        Some(h) => -(h * &masked_grad),
        None => -&masked_grad / masked_grad.norm().max(1.0),
    };
    for i in 0..n {
        if !mask[i] {
            direction[i] = 0.0;
        }
    }
    if !(masked_grad.dot(&direction) < 0.0) {
        direction = -&masked_grad / masked_grad.norm().max(1.0);
    }

    let mut alpha = 1.0;
    for _ in 0..=params.max_backtracks {
        let trial = project(&(&current.x + &direction * alpha), lo, hi);
        let decrease = grad.dot(&(&trial - &current.x));
        if decrease < 0.0 {
            let eval = functions.evaluate(&trial, false)?;
            check_evaluation(&eval, n, false)?;
            let value = merit_value(&eval, sigma);
            if value <= merit + params.sufficient_decrease * decrease {
                return Ok(Some(trial));
            }
        }
        alpha *= params.backtrack;
    }
    Ok(None)
}
