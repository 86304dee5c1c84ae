//! Batch runs driven by JSON configuration files, and report tables.
//!
//! A configuration names a model, a target, a mode (`hdm`, `progressive` or
//! `compare`) and the optimizer settings. [`run`] executes it and writes run
//! logs, the snapshot database and `summary.json` into the output directory.
//! [`report`] formats one or more run logs side by side.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{
    hdm_optimize, progressive_optimize, HdmOptions, ProgressiveOptions, RunLog, RunSummary,
};
use crate::hdm::{
    solve_hdm, BurgersModel, HdmModel, InverseDesignObjective, LinearParametricModel, ParameterDomain,
    SolverOptions,
};
use crate::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hdm,
    Progressive,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Burgers {
        #[serde(default = "default_burgers_n")]
        n: usize,
        #[serde(default = "default_viscosity")]
        viscosity: f64,
        #[serde(default = "default_burgers_params")]
        n_params: usize,
        #[serde(default)]
        domain: Option<ParameterDomain>,
    },
    Linear {
        #[serde(default = "default_linear_n")]
        n: usize,
        #[serde(default = "default_linear_params")]
        n_params: usize,
        #[serde(default)]
        domain: Option<ParameterDomain>,
    },
}

fn default_burgers_n() -> usize {
    BurgersModel::DEFAULT_NODES
}
fn default_viscosity() -> f64 {
    BurgersModel::DEFAULT_VISCOSITY
}
fn default_burgers_params() -> usize {
    BurgersModel::DEFAULT_PARAMS
}
fn default_linear_n() -> usize {
    50
}
fn default_linear_params() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgressiveConfig {
    #[serde(default)]
    pub epsilon0: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_max_subproblems")]
    pub max_subproblems: usize,
    #[serde(default = "default_subproblem_cap")]
    pub subproblem_iteration_cap: usize,
    #[serde(default = "default_rom_opt_tol")]
    pub optimality_tol: f64,
    #[serde(default = "default_feas_tol")]
    pub feasibility_tol: f64,
    /// Extra parameters sampled before the first subproblem.
    #[serde(default)]
    pub preseed: Vec<Vec<f64>>,
}

fn default_tau() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    1e-4
}
fn default_max_subproblems() -> usize {
    30
}
fn default_subproblem_cap() -> usize {
    25
}
fn default_rom_opt_tol() -> f64 {
    1e-8
}
fn default_feas_tol() -> f64 {
    1e-6
}

impl Default for ProgressiveConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdmConfig {
    #[serde(default = "default_hdm_cap")]
    pub iteration_cap: usize,
    #[serde(default = "default_hdm_opt_tol")]
    pub optimality_tol: f64,
    #[serde(default = "default_feas_tol")]
    pub feasibility_tol: f64,
}

fn default_hdm_cap() -> usize {
    200
}
fn default_hdm_opt_tol() -> f64 {
    1e-9
}

impl Default for HdmConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub abs_tol: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_newton")]
    pub max_iterations: usize,
}

fn default_rel_tol() -> f64 {
    1e-12
}
fn default_max_newton() -> usize {
    100
}

impl Default for SolverConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl SolverConfig {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_iterations: self.max_iterations,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub mode: Mode,
    /// Seeds the linear operator and, without `target_mu`, the target draw.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub target_mu: Option<Vec<f64>>,
    /// Starting parameter; defaults to the centre of the parameter box.
    #[serde(default)]
    pub mu0: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub progressive: ProgressiveConfig,
    #[serde(default)]
    pub hdm: HdmConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, format!("must be a positive number, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| {
            config_error("<config>", format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config { field, message } if field == "<config>" => Error::Config {
                field: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.progressive;
        if !(p.tau > 0.0 && p.tau < 1.0) {
            return Err(config_error("progressive.tau", format!("must lie in (0, 1), got {}", p.tau)));
        }
        positive("progressive.delta", p.delta)?;
        positive("progressive.optimality_tol", p.optimality_tol)?;
        positive("progressive.feasibility_tol", p.feasibility_tol)?;
        if let Some(e) = p.epsilon0 {
            positive("progressive.epsilon0", e)?;
        }
        if p.max_subproblems == 0 {
            return Err(config_error("progressive.max_subproblems", "must be at least 1"));
        }
        positive("hdm.optimality_tol", self.hdm.optimality_tol)?;
        positive("hdm.feasibility_tol", self.hdm.feasibility_tol)?;
        positive("solver.rel_tol", self.solver.rel_tol)?;
        if let Some(t) = self.solver.abs_tol {
            positive("solver.abs_tol", t)?;
        }
        let (n, n_params, domain) = match &self.model {
            ModelConfig::Burgers {
                n,
                viscosity,
                n_params,
                domain,
            } => {
                positive("model.viscosity", *viscosity)?;
                (*n, *n_params, domain)
            }
            ModelConfig::Linear { n, n_params, domain } => (*n, *n_params, domain),
        };
        if n < 2 {
            return Err(config_error("model.n", "need at least two unknowns"));
        }
        if n_params == 0 {
            return Err(config_error("model.n_params", "need at least one parameter"));
        }
        if let Some(d) = domain {
            if d.dim() != n_params {
                return Err(config_error("model.domain", "bounds length differs from n_params"));
            }
            d.validate().map_err(|e| config_error("model.domain", e.to_string()))?;
        }
        let domain = self.build_model().domain();
        for (field, v) in [("target_mu", &self.target_mu), ("mu0", &self.mu0)] {
            if let Some(v) = v {
                if !domain.contains(&DVector::from_column_slice(v)) {
                    return Err(config_error(field, "must lie in the parameter domain"));
                }
            }
        }
        for (i, v) in p.preseed.iter().enumerate() {
            if !domain.contains(&DVector::from_column_slice(v)) {
                return Err(config_error(
                    &format!("progressive.preseed[{i}]"),
                    "must lie in the parameter domain",
                ));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Box<dyn HdmModel> {
        match &self.model {
            ModelConfig::Burgers {
                n,
                viscosity,
                n_params,
                domain,
            } => {
                let mut m = BurgersModel::new(*n, *viscosity, *n_params);
                if let Some(d) = domain {
                    m = m.with_domain(d.clone());
                }
                Box::new(m)
            }
            ModelConfig::Linear { n, n_params, domain } => {
                let mut m = LinearParametricModel::random(*n, *n_params, self.seed);
                if let Some(d) = domain {
                    m = m.with_domain(d.clone());
                }
                Box::new(m)
            }
        }
    }

    /// The explicit target, or a draw from the middle 80% of the box.
    pub fn target(&self, domain: &ParameterDomain) -> DVector<f64> {
        if let Some(t) = &self.target_mu {
            return DVector::from_column_slice(t);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let draw = DVector::from_fn(domain.dim(), |i, _| {
            let (l, u) = (domain.lower[i], domain.upper[i]);
            let (l, u) = if l.is_finite() && u.is_finite() { (l, u) } else { (-1.0, 1.0) };
            let margin = 0.1 * (u - l);
            if u - l > 0.0 {
                rng.random_range((l + margin)..(u - margin))
            } else {
                l
            }
        });
        domain.project(&draw)
    }

    pub fn start(&self, domain: &ParameterDomain) -> DVector<f64> {
        match &self.mu0 {
            Some(m) => DVector::from_column_slice(m),
            None => domain.project(&DVector::from_fn(domain.dim(), |i, _| {
                let (l, u) = (domain.lower[i], domain.upper[i]);
                if l.is_finite() && u.is_finite() {
                    0.5 * (l + u)
                } else {
                    0.0
                }
            })),
        }
    }

    pub fn progressive_options(&self) -> ProgressiveOptions {
        let p = &self.progressive;
        ProgressiveOptions {
            epsilon0: p.epsilon0,
            tau: p.tau,
            delta: p.delta,
            max_subproblems: p.max_subproblems,
            subproblem_iteration_cap: p.subproblem_iteration_cap,
            optimality_tol: p.optimality_tol,
            feasibility_tol: p.feasibility_tol,
            solver: self.solver.options(),
            preseed: p.preseed.iter().map(|v| DVector::from_column_slice(v)).collect(),
            ..ProgressiveOptions::default()
        }
    }

    pub fn hdm_options(&self) -> HdmOptions {
        HdmOptions {
            iteration_cap: self.hdm.iteration_cap,
            optimality_tol: self.hdm.optimality_tol,
            feasibility_tol: self.hdm.feasibility_tol,
            solver: self.solver.options(),
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: Vec<RunSummary>,
    /// Progressive over HDM-based full-model solves, in compare mode.
    #[serde(default)]
    pub hdm_evaluation_ratio: Option<f64>,
}

fn write_summary(dir: &Path, summary: &Summary) -> Result<()> {
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(summary).map_err(|source| Error::Json {
        context: "serializing summary".into(),
        source,
    })?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Executes a configuration and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<Summary> {
    let model = config.build_model();
    let domain = model.domain();
    let target_mu = config.target(&domain);
    let target_state = solve_hdm(
        model.as_ref(),
        &target_mu,
        &model.initial_guess(&target_mu),
        &config.solver.options(),
    )?
    .state;
    let objective = InverseDesignObjective::new(target_state);
    let mu0 = config.start(&domain);
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let run_hdm = |dir: &Path| -> Result<RunSummary> {
        let mut outcome = hdm_optimize(model.as_ref(), &objective, &mu0, &config.hdm_options())?;
        outcome.log.summary.set_target(target_mu.as_slice());
        outcome.log.save(dir)?;
        outcome.database.save(dir)?;
        Ok(outcome.log.summary)
    };
    let run_progressive = |dir: &Path| -> Result<RunSummary> {
        let mut outcome =
            progressive_optimize(model.as_ref(), &objective, &mu0, &config.progressive_options())?;
        outcome.log.summary.set_target(target_mu.as_slice());
        outcome.log.save(dir)?;
        outcome.database.save(dir)?;
        Ok(outcome.log.summary)
    };

    let summary = match config.mode {
        Mode::Hdm => Summary {
            runs: vec![run_hdm(out)?],
            hdm_evaluation_ratio: None,
        },
        Mode::Progressive => Summary {
            runs: vec![run_progressive(out)?],
            hdm_evaluation_ratio: None,
        },
        Mode::Compare => {
            let hdm = run_hdm(&out.join("hdm"))?;
            let progressive = run_progressive(&out.join("progressive"))?;
            let ratio = progressive.hdm_evaluations as f64 / hdm.hdm_evaluations as f64;
            Summary {
                runs: vec![hdm, progressive],
                hdm_evaluation_ratio: Some(ratio),
            }
        }
    };
    write_summary(out, &summary)?;
    Ok(summary)
}

/// Expands a compare-mode output directory into its two run directories.
fn expand(path: &Path) -> Vec<PathBuf> {
    if path.is_dir() && !path.join(crate::driver::JSON_FILE).exists() {
        let subs: Vec<PathBuf> = ["hdm", "progressive"]
            .iter()
            .map(|s| path.join(s))
            .filter(|p| p.join(crate::driver::JSON_FILE).exists())
            .collect();
        if !subs.is_empty() {
            return subs;
        }
    }
    vec![path.to_path_buf()]
}

fn fmt_sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6e}")
    } else {
        "-".into()
    }
}

/// Formats a comparison table with one column per run log.
pub fn report(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::invalid("no run logs given"));
    }
    let mut columns: Vec<(String, RunSummary)> = Vec::new();
    for path in paths.iter().flat_map(|p| expand(p)) {
        let log = RunLog::load(&path)?;
        let name = format!("{} ({})", log.summary.mode, path.display());
        columns.push((name, log.summary));
    }
    let rows: Vec<(&str, Box<dyn Fn(&RunSummary) -> String>)> = vec![
        ("# of HDM Evaluations", Box::new(|s| s.hdm_evaluations.to_string())),
        ("# of ROM Evaluations", Box::new(|s| s.rom_evaluations.to_string())),
        ("Initial objective", Box::new(|s| fmt_sci(s.initial_objective))),
        ("Final objective", Box::new(|s| fmt_sci(s.final_objective))),
        (
            "Relative parameter error",
            Box::new(|s| s.relative_parameter_error.map_or("-".into(), fmt_sci)),
        ),
        ("Status", Box::new(|s| s.status.clone())),
    ];
    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let cells: Vec<Vec<String>> = columns
        .iter()
        .map(|(_, s)| rows.iter().map(|(_, f)| f(s)).collect())
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .zip(&cells)
        .map(|((name, _), c)| c.iter().map(String::len).chain([name.len()]).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:label_width$}", "");
    for ((name, _), w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {name:>w$}");
    }
    out.push('\n');
    for (r, (label, _)) in rows.iter().enumerate() {
        let _ = write!(out, "{label:label_width$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", c[r]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Process exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config { .. } => 2,
        _ => 1,
    }
}
