use nalgebra::DVector;

use super::database::SnapshotDatabase;
use super::runlog::{QueryRecord, RunLog, RunSummary};
use crate::hdm::{
    gradient_direct, hdm_sensitivities, solve_hdm, Functional, HdmModel, HdmSample, SolverOptions,
};
use crate::nlp::{nlp_solve, Evaluation, NlpFunctions, NlpProblem, NlpResult, NlpStatus};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct HdmOptions {
    pub iteration_cap: usize,
    pub optimality_tol: f64,
    pub feasibility_tol: f64,
    pub solver: SolverOptions,
}

impl Default for HdmOptions {
    fn default() -> Self {
        Self {
            iteration_cap: 200,
            optimality_tol: 1e-9,
            feasibility_tol: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HdmOutcome {
    pub log: RunLog,
    pub mu_star: DVector<f64>,
    pub objective: f64,
    pub nlp: NlpResult,
    /// Points where gradients were taken, with their sensitivities.
    pub database: SnapshotDatabase,
}

/// Objective backed by a full-model solve at every new parameter.
struct HdmFunctions<'a, M: HdmModel + ?Sized, F: Functional + ?Sized> {
    model: &'a M,
    objective: &'a F,
    solver: &'a SolverOptions,
    /// Every computed steady state, for warm starts.
    states: Vec<DVector<f64>>,
    last: Option<(DVector<f64>, DVector<f64>, f64, f64)>,
    queries: Vec<QueryRecord>,
    db: SnapshotDatabase,
}

impl<M: HdmModel + ?Sized, F: Functional + ?Sized> HdmFunctions<'_, M, F> {
    fn state_at(&mut self, x: &DVector<f64>) -> Result<(DVector<f64>, f64, f64)> {
        if let Some((mu, w, value, res)) = &self.last {
            if mu == x {
                return Ok((w.clone(), *value, *res));
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, w) in self.states.iter().enumerate() {
            let norm = self.model.residual(w, x).norm();
            if best.is_none_or(|(_, b)| norm < b) {
                best = Some((i, norm));
            }
        }
        let w0 = match best {
            Some((i, _)) => self.states[i].clone(),
            None => self.model.initial_guess(x),
        };
        let solve = solve_hdm(self.model, x, &w0, self.solver)?;
        let value = self.objective.value(&solve.state, x);
        self.queries.push(QueryRecord {
            query: self.queries.len() + 1,
            mu: x.as_slice().to_vec(),
            objective: value,
            newton_iterations: solve.iterations,
            residual_norm: solve.residual_norm,
        });
        self.states.push(solve.state.clone());
        self.last = Some((x.clone(), solve.state.clone(), value, solve.residual_norm));
        Ok((solve.state, value, solve.residual_norm))
    }
}

impl<M: HdmModel + ?Sized, F: Functional + ?Sized> NlpFunctions for HdmFunctions<'_, M, F> {
    fn evaluate(&mut self, x: &DVector<f64>, need_gradient: bool) -> Result<Evaluation> {
        let (w, value, residual_norm) = self.state_at(x)?;
        let gradient = if need_gradient {
            let s = hdm_sensitivities(self.model, &w, x)?;
            let g = gradient_direct(self.model, self.objective, &w, x, &s)?;
            if self.db.find(x).is_none() {
                self.db.push(HdmSample {
                    mu: x.clone(),
                    state: w,
                    sensitivities: s,
                    objective_value: value,
                    residual_norm_at_solve: residual_norm,
                })?;
            }
            Some(g)
        } else {
            None
        };
        Ok(Evaluation::unconstrained(value, gradient))
    }
}

/// Nested analysis and design: the optimizer sees `J(w(μ), μ)` with each new
/// parameter triggering a warm-started full-model solve.
pub fn hdm_optimize<M, F>(model: &M, objective: &F, mu0: &DVector<f64>, opts: &HdmOptions) -> Result<HdmOutcome>
where
    M: HdmModel + ?Sized,
    F: Functional + ?Sized,
{
    let domain = model.domain();
    domain.validate()?;
    if !domain.contains(mu0) {
        return Err(Error::invalid("initial parameter lies outside the parameter domain"));
    }
    let problem = NlpProblem::new(domain.lower.clone(), domain.upper.clone())
        .with_fixed(domain.fixed.clone())
        .with_iteration_cap(opts.iteration_cap)
        .with_tolerances(opts.optimality_tol, opts.feasibility_tol);
    let mut functions = HdmFunctions {
        model,
        objective,
        solver: &opts.solver,
        states: Vec::new(),
        last: None,
        queries: Vec::new(),
        db: SnapshotDatabase::new(),
    };
    let nlp = nlp_solve(&problem, &mut functions, mu0)?;
    let status = match nlp.status {
        NlpStatus::Optimal => "optimal",
        NlpStatus::IterationCap => "iteration_cap",
        NlpStatus::LinesearchFailure => "linesearch_failure",
    };
    let initial_objective = functions.queries.first().map_or(f64::NAN, |q| q.objective);
    let summary = RunSummary {
        mode: "hdm".into(),
        status: status.into(),
        hdm_evaluations: functions.queries.len(),
        rom_evaluations: 0,
        initial_objective,
        final_objective: nlp.objective_value,
        mu_star: nlp.x_star.as_slice().to_vec(),
        mu_target: None,
        relative_parameter_error: None,
    };
    Ok(HdmOutcome {
        log: RunLog {
            summary,
            subproblems: Vec::new(),
            queries: functions.queries,
        },
        mu_star: nlp.x_star.clone(),
        objective: nlp.objective_value,
        nlp,
        database: functions.db,
    })
}
