use nalgebra::{DMatrix, DVector};

use super::database::SnapshotDatabase;
use super::runlog::{RunLog, RunSummary, SubproblemRecord};
use super::{adapt_epsilon, converged, rho, select_init_param, TrustRegionState};
use crate::basis::{update_rob, RomSpace, DEFAULT_RANK_TOLERANCE};
use crate::hdm::{sample_hdm, Functional, HdmModel, ParameterDomain, SolverOptions};
use crate::nlp::{nlp_solve, Evaluation, NlpFunctions, NlpProblem, NlpResult};
use crate::rom::{RomEvaluation, RomInstance};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ProgressiveOptions {
    /// Initial trust-region size; `None` derives it from the first ROM.
    pub epsilon0: Option<f64>,
    pub tau: f64,
    pub delta: f64,
    pub max_subproblems: usize,
    pub subproblem_iteration_cap: usize,
    pub optimality_tol: f64,
    pub feasibility_tol: f64,
    pub rank_tolerance: f64,
    pub solver: SolverOptions,
    /// Extra parameters sampled before the first subproblem.
    pub preseed: Vec<DVector<f64>>,
}

impl Default for ProgressiveOptions {
    fn default() -> Self {
        Self {
            epsilon0: None,
            tau: 0.1,
            delta: 1e-4,
            max_subproblems: 30,
            subproblem_iteration_cap: 25,
            optimality_tol: 1e-8,
            feasibility_tol: 1e-6,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            solver: SolverOptions::default(),
            preseed: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    MaxSubproblems,
    /// A full-model solve failed; the log covers the work done before it.
    HdmFailure(String),
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxSubproblems => "max_subproblems",
            RunStatus::HdmFailure(_) => "hdm_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProgressiveOutcome {
    pub log: RunLog,
    pub database: SnapshotDatabase,
    pub mu_best: DVector<f64>,
    pub objective_best: f64,
    pub status: RunStatus,
    pub final_epsilon: f64,
}

/// Reduced objective and normalized trust-region constraint
/// `½‖R‖²/ε − 1 ≤ 0` for one subproblem.
struct RomSubproblem<'a, 'm, M: HdmModel + ?Sized, F: Functional + ?Sized> {
    rom: &'a RomInstance<'m, M>,
    objective: &'a F,
    epsilon: f64,
    cache: Option<(RomEvaluation, Option<Evaluation>)>,
    evaluations: usize,
    indicator_trace: Vec<f64>,
}

impl<M: HdmModel + ?Sized, F: Functional + ?Sized> RomSubproblem<'_, '_, M, F> {
    fn rom_evaluation(&mut self, x: &DVector<f64>) -> Result<RomEvaluation> {
        if let Some((eval, _)) = &self.cache {
            if eval.mu == *x {
                return Ok(eval.clone());
            }
        }
        let eval = self.rom.evaluate(x)?;
        self.evaluations += 1;
        self.indicator_trace.push(eval.indicator());
        self.cache = Some((eval.clone(), None));
        Ok(eval)
    }
}

impl<M: HdmModel + ?Sized, F: Functional + ?Sized> NlpFunctions for RomSubproblem<'_, '_, M, F> {
    fn evaluate(&mut self, x: &DVector<f64>, need_gradient: bool) -> Result<Evaluation> {
        if let Some((eval, Some(full))) = &self.cache {
            if eval.mu == *x {
                return Ok(full.clone());
            }
        }
        let eval = self.rom_evaluation(x)?;
        let value = self.objective.value(&eval.state, x);
        let indicator = eval.indicator();
        let mut out = Evaluation {
            objective: value,
            constraints: DVector::from_element(1, indicator / self.epsilon - 1.0),
            gradient: None,
            constraint_jacobian: None,
        };
        if need_gradient {
            let sens = eval.minimum_error_sensitivities()?;
            out.gradient = Some(eval.functional_gradient(self.objective, self.rom.basis(), &sens));
            let g = eval.indicator_gradient(&sens) / self.epsilon;
            out.constraint_jacobian = Some(DMatrix::from_row_slice(1, g.len(), g.as_slice()));
            self.cache = Some((eval, Some(out.clone())));
        }
        Ok(out)
    }
}

struct Pending {
    record: usize,
    mu_star: DVector<f64>,
    objective_start: f64,
    reduced_start: f64,
    reduced_star: f64,
    indicator_star: f64,
}

struct Sampler<'a, M: HdmModel + ?Sized, F: Functional + ?Sized> {
    model: &'a M,
    objective: &'a F,
    solver: &'a SolverOptions,
    db: SnapshotDatabase,
    queries: usize,
}

impl<M: HdmModel + ?Sized, F: Functional + ?Sized> Sampler<'_, M, F> {
    /// Returns the database index of `mu`, solving the full model if it has
    /// not been sampled yet.
    fn sample(&mut self, mu: &DVector<f64>) -> Result<(usize, bool)> {
        if let Some(i) = self.db.find(mu) {
            return Ok((i, false));
        }
        let w0 = match self.db.closest_state(self.model, mu) {
            Some((i, _)) => self.db.samples()[i].state.clone(),
            None => self.model.initial_guess(mu),
        };
        self.queries += 1;
        let (sample, _) = sample_hdm(self.model, self.objective, mu, &w0, self.solver)?;
        Ok((self.db.push(sample)?, true))
    }
}

fn nlp_problem(domain: &ParameterDomain, opts: &ProgressiveOptions) -> NlpProblem {
    NlpProblem::new(domain.lower.clone(), domain.upper.clone())
        .with_fixed(domain.fixed.clone())
        .with_iteration_cap(opts.subproblem_iteration_cap)
        .with_tolerances(opts.optimality_tol, opts.feasibility_tol)
}

/// `10 · ½‖R‖²` of the first ROM at `μ₀` shifted by a tenth of the box.
fn default_epsilon<M: HdmModel + ?Sized>(
    rom: &RomInstance<'_, M>,
    domain: &ParameterDomain,
    mu0: &DVector<f64>,
) -> Result<f64> {
    let step = DVector::from_fn(mu0.len(), |i, _| {
        let width = domain.upper[i] - domain.lower[i];
        if width.is_finite() {
            0.1 * width
        } else {
            0.1 * mu0[i].abs().max(1.0)
        }
    });
    let mut probe = domain.project(&(mu0 + &step));
    if probe == *mu0 {
        probe = domain.project(&(mu0 - &step));
    }
    let value = 10.0 * rom.evaluate(&probe)?.indicator();
    Ok(if value > 0.0 && value.is_finite() { value } else { 1e-10 })
}

/// Runs the progressive ROM-constrained optimization from `mu0`.
pub fn progressive_optimize<M, F>(
    model: &M,
    objective: &F,
    mu0: &DVector<f64>,
    opts: &ProgressiveOptions,
) -> Result<ProgressiveOutcome>
where
    M: HdmModel + ?Sized,
    F: Functional + ?Sized,
{
    let domain = model.domain();
    domain.validate()?;
    if !domain.contains(mu0) {
        return Err(Error::invalid("initial parameter lies outside the parameter domain"));
    }
    if !(opts.delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    if let Some(e) = opts.epsilon0 {
        TrustRegionState::new(e, opts.tau)?;
    }
    let problem = nlp_problem(&domain, opts);

    let mut sampler = Sampler {
        model,
        objective,
        solver: &opts.solver,
        db: SnapshotDatabase::new(),
        queries: 0,
    };
    let mut records: Vec<SubproblemRecord> = Vec::new();
    let mut rom_evaluations = 0usize;
    let mut status = RunStatus::MaxSubproblems;

    for mu in opts.preseed.iter().chain(std::iter::once(mu0)) {
        if !domain.contains(mu) {
            return Err(Error::invalid("pre-seed parameter lies outside the parameter domain"));
        }
        if let Err(e) = sampler.sample(mu) {
            return Ok(aborted(sampler, records, rom_evaluations, mu0, e));
        }
    }
    let initial_objective = sampler.db.find(mu0).map(|i| sampler.db.samples()[i].objective_value).unwrap();

    let mut space: Option<RomSpace> = None;
    let mut tr: Option<TrustRegionState> = None;
    let mut pending: Option<Pending> = None;
    let mut mu_prev_star = mu0.clone();
    let mut economy: Option<(DVector<f64>, f64)> = None;

    for j in 0..opts.max_subproblems {
        let mut new_sample = None;
        if let Some(p) = pending.take() {
            let (idx, fresh) = match sampler.sample(&p.mu_star) {
                Ok(r) => r,
                Err(e) => return Ok(aborted(sampler, records, rom_evaluations, mu0, e)),
            };
            if fresh {
                new_sample = Some(idx);
            }
            let actual = sampler.db.samples()[idx].objective_value;
            let ratio = rho(p.objective_start, actual, p.reduced_start, p.reduced_star);
            records[p.record].objective_star = Some(actual);
            records[p.record].rho = Some(ratio);
            tr = tr.map(|t| adapt_epsilon(t, ratio));
        }

        let mu_start = select_init_param(&sampler.db)?;
        let start_idx = sampler.db.find(&mu_start).expect("selected parameter is stored");
        let objective_start = sampler.db.samples()[start_idx].objective_value;
        let (ref_idx, _) = sampler.db.closest_state(model, &mu_start).expect("database is not empty");
        let reference = sampler.db.samples()[ref_idx].state.clone();

        let updated = match (&space, new_sample) {
            (None, _) => RomSpace::from_snapshots(
                reference,
                &sampler.db.state_matrix(),
                &sampler.db.sensitivity_matrix(),
                opts.rank_tolerance,
            )?,
            (Some(s), Some(idx)) => {
                let sample = &sampler.db.samples()[idx];
                let state = DMatrix::from_column_slice(sample.state.len(), 1, sample.state.as_slice());
                update_rob(s, &reference, &state, &sample.sensitivities)?
            }
            (Some(s), None) => {
                let n = s.state_dim();
                update_rob(s, &reference, &DMatrix::zeros(n, 0), &DMatrix::zeros(n, 0))?
            }
        };
        space = Some(updated.clone());
        let rom = RomInstance::lspg(model, updated)?;

        let trust = match tr {
            Some(t) => t,
            None => {
                let eps = match opts.epsilon0 {
                    Some(e) => e,
                    None => {
                        rom_evaluations += 1;
                        default_epsilon(&rom, &domain, mu0)?
                    }
                };
                TrustRegionState::new(eps, opts.tau)?
            }
        };
        tr = Some(trust);

        let mut sub = RomSubproblem {
            rom: &rom,
            objective,
            epsilon: trust.epsilon,
            cache: None,
            evaluations: 0,
            indicator_trace: Vec::new(),
        };
        let start_eval = sub.evaluate(&mu_start, true)?;
        let result: NlpResult = nlp_solve(&problem, &mut sub, &mu_start)?;
        let indicator_star = sub.rom_evaluation(&result.x_star)?.indicator();
        rom_evaluations += sub.evaluations;

        records.push(SubproblemRecord {
            index: j,
            mu_start: mu_start.as_slice().to_vec(),
            mu_star: result.x_star.as_slice().to_vec(),
            epsilon: trust.epsilon,
            rho: None,
            nlp_iterations: result.iterations,
            nlp_status: result.status,
            rom_evaluations: sub.evaluations,
            hdm_queries: sampler.queries,
            basis_size: rom.basis_size(),
            objective_start,
            reduced_objective_star: result.objective_value,
            objective_star: None,
            indicator_star,
            indicator_trace: sub.indicator_trace.clone(),
        });

        let done = converged(&mu_prev_star, &result.x_star, opts.delta);
        mu_prev_star = result.x_star.clone();
        let p = Pending {
            record: records.len() - 1,
            mu_star: result.x_star.clone(),
            objective_start,
            reduced_start: start_eval.objective,
            reduced_star: result.objective_value,
            indicator_star,
        };
        if done {
            status = RunStatus::Converged;
            pending = Some(p);
            break;
        }
        pending = Some(p);
    }

    // Final sample, skipped when the ROM is already exact to solver tolerance.
    if let Some(p) = pending {
        let tol = opts.solver.absolute_tolerance(model.state_dim());
        let last = &mut records[p.record];
        if let Some(i) = sampler.db.find(&p.mu_star) {
            last.objective_star = Some(sampler.db.samples()[i].objective_value);
        } else if (2.0 * p.indicator_star).sqrt() <= tol {
            last.objective_star = Some(p.reduced_star);
            economy = Some((p.mu_star.clone(), p.reduced_star));
        } else {
            match sampler.sample(&p.mu_star) {
                Ok((i, _)) => {
                    let actual = sampler.db.samples()[i].objective_value;
                    let last = &mut records[p.record];
                    last.objective_star = Some(actual);
                    last.rho = Some(rho(p.objective_start, actual, p.reduced_start, p.reduced_star));
                }
                Err(e) => return Ok(aborted(sampler, records, rom_evaluations, mu0, e)),
            }
        }
    }

    let best = sampler.db.best_index().expect("database is not empty");
    let (mut mu_best, mut objective_best) = {
        let s = &sampler.db.samples()[best];
        (s.mu.clone(), s.objective_value)
    };
    if let Some((mu, value)) = economy {
        if value < objective_best {
            mu_best = mu;
            objective_best = value;
        }
    }

    let summary = RunSummary {
        mode: "progressive".into(),
        status: status.name().into(),
        hdm_evaluations: sampler.queries,
        rom_evaluations,
        initial_objective,
        final_objective: objective_best,
        mu_star: mu_best.as_slice().to_vec(),
        mu_target: None,
        relative_parameter_error: None,
    };
    Ok(ProgressiveOutcome {
        log: RunLog {
            summary,
            subproblems: records,
            queries: Vec::new(),
        },
        database: sampler.db,
        mu_best,
        objective_best,
        status,
        final_epsilon: tr.map_or(f64::NAN, |t| t.epsilon),
    })
}

fn aborted<M: HdmModel + ?Sized, F: Functional + ?Sized>(
    sampler: Sampler<'_, M, F>,
    records: Vec<SubproblemRecord>,
    rom_evaluations: usize,
    mu0: &DVector<f64>,
    error: Error,
) -> ProgressiveOutcome {
    let best = sampler.db.best_index();
    let (mu_best, objective_best) = match best {
        Some(i) => (sampler.db.samples()[i].mu.clone(), sampler.db.samples()[i].objective_value),
        None => (mu0.clone(), f64::NAN),
    };
    let initial = sampler
        .db
        .find(mu0)
        .map_or(f64::NAN, |i| sampler.db.samples()[i].objective_value);
    let status = RunStatus::HdmFailure(error.to_string());
    ProgressiveOutcome {
        log: RunLog {
            summary: RunSummary {
                mode: "progressive".into(),
                status: status.name().into(),
                hdm_evaluations: sampler.queries,
                rom_evaluations,
                initial_objective: initial,
                final_objective: objective_best,
                mu_star: mu_best.as_slice().to_vec(),
                mu_target: None,
                relative_parameter_error: None,
            },
            subproblems: records,
            queries: Vec::new(),
        },
        database: sampler.db,
        mu_best,
        objective_best,
        status,
        final_epsilon: f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdm::{InverseDesignObjective, LinearParametricModel};

    fn linear_problem() -> (LinearParametricModel, InverseDesignObjective, DVector<f64>) {
        let model = LinearParametricModel::random(30, 2, 11);
        let target_mu = DVector::from_column_slice(&[1.5, -2.0]);
        let target = model.operator().clone().lu().solve(&model.load(&target_mu)).unwrap();
        (model, InverseDesignObjective::new(target), target_mu)
    }

    #[test]
    fn linear_inverse_design_converges_in_few_samples() {
        let (model, objective, target) = linear_problem();
        let out = progressive_optimize(&model, &objective, &DVector::zeros(2), &ProgressiveOptions::default())
            .unwrap();
        let err = (&out.mu_best - &target).norm() / target.norm();
        assert_eq!(out.status, RunStatus::Converged);
        assert!(err < 1e-8, "relative error {err:e}");
        assert!(out.log.summary.hdm_evaluations <= 3, "{} samples", out.log.summary.hdm_evaluations);
    }

    #[test]
    fn first_reduced_objective_matches_true_objective() {
        let (model, objective, _) = linear_problem();
        let out = progressive_optimize(&model, &objective, &DVector::zeros(2), &ProgressiveOptions::default())
            .unwrap();
        for r in &out.log.subproblems {
            assert!(r.indicator_trace[0] <= 1e-20);
        }
        let queries: Vec<usize> = out.log.subproblems.iter().map(|r| r.hdm_queries).collect();
        assert!(queries.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_start_outside_domain() {
        let (model, objective, _) = linear_problem();
        let mu0 = DVector::from_column_slice(&[100.0, 0.0]);
        assert!(progressive_optimize(&model, &objective, &mu0, &ProgressiveOptions::default()).is_err());
    }
}
