use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nlp::NlpStatus;
use crate::{Error, Result};

pub const CSV_FILE: &str = "runlog.csv";
pub const JSON_FILE: &str = "runlog.json";

/// One reduced trust-region subproblem of a progressive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemRecord {
    pub index: usize,
    pub mu_start: Vec<f64>,
    pub mu_star: Vec<f64>,
    pub epsilon: f64,
    /// Filled in once `mu_star` has been sampled.
    pub rho: Option<f64>,
    pub nlp_iterations: usize,
    pub nlp_status: NlpStatus,
    pub rom_evaluations: usize,
    /// Cumulative full-model solves when the subproblem started.
    pub hdm_queries: usize,
    pub basis_size: usize,
    pub objective_start: f64,
    pub reduced_objective_star: f64,
    /// Filled in once `mu_star` has been sampled.
    pub objective_star: Option<f64>,
    pub indicator_star: f64,
    /// Error indicator after every ROM evaluation in the subproblem.
    pub indicator_trace: Vec<f64>,
}

/// One full-model objective evaluation of an HDM-based run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query: usize,
    pub mu: Vec<f64>,
    pub objective: f64,
    pub newton_iterations: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub status: String,
    pub hdm_evaluations: usize,
    pub rom_evaluations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub mu_star: Vec<f64>,
    #[serde(default)]
    pub mu_target: Option<Vec<f64>>,
    #[serde(default)]
    pub relative_parameter_error: Option<f64>,
}

impl RunSummary {
    pub fn objective_reduction_orders(&self) -> f64 {
        if self.final_objective <= 0.0 {
            return f64::INFINITY;
        }
        (self.initial_objective / self.final_objective).log10()
    }

    pub fn set_target(&mut self, target: &[f64]) {
        let num: f64 = self
            .mu_star
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = target.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.mu_target = Some(target.to_vec());
        self.relative_parameter_error = Some(if den > 0.0 { num / den } else { num });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub summary: RunSummary,
    #[serde(default)]
    pub subproblems: Vec<SubproblemRecord>,
    #[serde(default)]
    pub queries: Vec<QueryRecord>,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn status_name(s: NlpStatus) -> &'static str {
    match s {
        NlpStatus::Optimal => "optimal",
        NlpStatus::IterationCap => "iteration_cap",
        NlpStatus::LinesearchFailure => "linesearch_failure",
    }
}

impl RunLog {
    /// Writes `runlog.csv` and `runlog.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(CSV_FILE);
        let csv_err = |source| Error::Csv {
            context: csv_path.display().to_string(),
            source,
        };
        let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
        if self.summary.mode == "hdm" {
            w.write_record(["query", "mu", "objective", "newton_iterations", "residual_norm"])
                .map_err(csv_err)?;
            for q in &self.queries {
                w.write_record([
                    q.query.to_string(),
                    join(&q.mu),
                    q.objective.to_string(),
                    q.newton_iterations.to_string(),
                    q.residual_norm.to_string(),
                ])
                .map_err(csv_err)?;
            }
        } else {
            w.write_record([
                "subproblem",
                "mu_start",
                "mu_star",
                "epsilon",
                "rho",
                "nlp_iterations",
                "nlp_status",
                "rom_evaluations",
                "hdm_queries",
                "basis_size",
                "objective_start",
                "reduced_objective_star",
                "objective_star",
                "indicator_star",
            ])
            .map_err(csv_err)?;
            for r in &self.subproblems {
                w.write_record([
                    r.index.to_string(),
                    join(&r.mu_start),
                    join(&r.mu_star),
                    r.epsilon.to_string(),
                    opt(r.rho),
                    r.nlp_iterations.to_string(),
                    status_name(r.nlp_status).to_string(),
                    r.rom_evaluations.to_string(),
                    r.hdm_queries.to_string(),
                    r.basis_size.to_string(),
                    r.objective_start.to_string(),
                    r.reduced_objective_star.to_string(),
                    opt(r.objective_star),
                    r.indicator_star.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;

        let json_path = dir.join(JSON_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serializing run log".into(),
            source,
        })?;
        fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))
    }

    /// Reads a run log from `runlog.json`, or from the JSON file next to a
    /// given `runlog.csv`, or from a directory containing either.
    pub fn load(path: &Path) -> Result<Self> {
        let json_path = if path.is_dir() {
            path.join(JSON_FILE)
        } else if path.extension().is_some_and(|e| e == "csv") {
            path.with_extension("json")
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: json_path.display().to_string(),
            source,
        })
    }
}
