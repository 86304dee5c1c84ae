//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use progrom::basis::{brand_append, brand_translate, thin_svd, FactoredBasis, RomSpace, DEFAULT_RANK_TOLERANCE};
use progrom::cli::{run, RunConfig, Summary};
use progrom::driver::{adapt_epsilon, progressive_optimize, TrustRegionState};
use progrom::hdm::{
    gradient_adjoint, gradient_direct, hdm_sensitivities, sample_hdm, solve_hdm, BurgersModel, Functional,
    HdmModel, InverseDesignObjective, SolverOptions,
};
use progrom::rom::RomInstance;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

/// Sines of the principal angles between two orthonormal column sets,
/// from the singular values of the component of `b` orthogonal to `a`.
fn max_principal_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    let outside = b - a * a.tr_mul(b);
    outside.singular_values().iter().fold(0.0_f64, |m, s| m.max(*s))
}

fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| {
        // Box-Muller
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Singular values and left subspace by one-sided Jacobi rotations, cut at
/// the same relative threshold the factored bases use.
fn direct_svd(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut a = x.clone();
    let n = a.ncols();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (ci, cj) = (a.column(i).into_owned(), a.column(j).into_owned());
                a.set_column(i, &(&ci * c - &cj * s));
                a.set_column(j, &(&ci * s + &cj * c));
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|j| (a.column(j).norm(), j)).collect();
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0));
    let smax = pairs[0].0;
    let kept: Vec<(f64, usize)> = pairs.into_iter().filter(|p| p.0 > DEFAULT_RANK_TOLERANCE * smax).collect();
    let cols: Vec<DVector<f64>> = kept.iter().map(|&(s, j)| a.column(j) / s).collect();
    (kept.iter().map(|p| p.0).collect(), DMatrix::from_columns(&cols))
}

fn compare_factors(f: &FactoredBasis, x: &DMatrix<f64>) -> (f64, f64) {
    let (sigma, u) = direct_svd(x);
    if sigma.len() != f.rank() {
        return (f64::INFINITY, 1.0);
    }
    let smax = sigma[0];
    let sv_err = sigma
        .iter()
        .zip(f.singular_values.iter())
        .map(|(a, b)| (a - b).abs() / smax)
        .fold(0.0, f64::max);
    (sv_err, max_principal_sine(&u, &f.left_vectors))
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut sv, mut angle) = (0.0_f64, 0.0_f64);
    for case in 0..50 {
        let m = rng.random_range(8..=64);
        let n = rng.random_range(1..=16.min(m / 2));
        let k = rng.random_range(1..=(16 - n).max(1));
        let x = if case % 5 == 4 && n > 2 {
            // rank-deficient base matrix
            gaussian(&mut rng, m, 2) * gaussian(&mut rng, 2, n)
        } else {
            gaussian(&mut rng, m, n)
        };
        let y = gaussian(&mut rng, m, k);
        let a = gaussian(&mut rng, m, 1).column(0).into_owned();
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).map_err(|e| e.to_string())?;

        let appended = brand_append(&f, &y).map_err(|e| e.to_string())?;
        let (s1, a1) = compare_factors(&appended, &DMatrix::from_columns(
            &x.column_iter().chain(y.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>(),
        ));
        let translated = brand_translate(&f, &a).map_err(|e| e.to_string())?;
        let shifted = DMatrix::from_fn(m, n, |i, j| x[(i, j)] + a[i]);
        let (s2, a2) = compare_factors(&translated, &shifted);
        sv = sv.max(s1).max(s2);
        angle = angle.max(a1).max(a2);
    }
    let t = start.elapsed();
    ensure(
        sv <= 1e-9 && angle < 1e-8 && t < Duration::from_secs(5),
        format!("50 cases: max sigma error {sv:.2e}, max principal-angle sine {angle:.2e}, {t:.2?}"),
    )
}

fn burgers_target(model: &BurgersModel) -> InverseDesignObjective {
    let mu = DVector::from_column_slice(&[0.45, 0.2, -0.1, -0.15]);
    let w = solve_hdm(model, &mu, &model.initial_guess(&mu), &SolverOptions::default()).unwrap();
    InverseDesignObjective::new(w.state)
}

fn random_feasible(model: &BurgersModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let d = model.domain();
    DVector::from_fn(d.dim(), |i, _| rng.random_range(d.lower[i]..=d.upper[i]))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let model = BurgersModel::default();
    let objective = burgers_target(&model);
    let opts = SolverOptions::default();
    let solve = |mu: &DVector<f64>| -> std::result::Result<DVector<f64>, String> {
        solve_hdm(&model, mu, &model.initial_guess(mu), &opts).map(|s| s.state).map_err(|e| e.to_string())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let mu = random_feasible(&model, &mut rng);
        let w = solve(&mu)?;
        let s = hdm_sensitivities(&model, &w, &mu).map_err(|e| e.to_string())?;
        let direct = gradient_direct(&model, &objective, &w, &mu, &s).map_err(|e| e.to_string())?;
        let adjoint = gradient_adjoint(&model, &objective, &w, &mu).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let mut fd = DVector::zeros(mu.len());
        for j in 0..mu.len() {
            let (mut p, mut m) = (mu.clone(), mu.clone());
            p[j] += h;
            m[j] -= h;
            fd[j] = (objective.value(&solve(&p)?, &p) - objective.value(&solve(&m)?, &m)) / (2.0 * h);
        }
        worst = worst.max(rel(&direct, &adjoint)).max(rel(&direct, &fd)).max(rel(&adjoint, &fd));
    }
    let t = start.elapsed();
    ensure(
        worst <= 1e-5 && t < Duration::from_secs(30),
        format!("5 points: worst pairwise relative gap {worst:.2e}, {t:.2?}"),
    )
}

fn training_space(model: &BurgersModel, mus: &[[f64; 4]]) -> std::result::Result<(RomSpace, Vec<(DVector<f64>, DMatrix<f64>)>), String> {
    let objective = burgers_target(model);
    let opts = SolverOptions::default();
    let mut states = Vec::new();
    let mut sens = Vec::new();
    let mut samples = Vec::new();
    for mu in mus {
        let mu = DVector::from_column_slice(mu);
        let (sample, _) =
            sample_hdm(model, &objective, &mu, &model.initial_guess(&mu), &opts).map_err(|e| e.to_string())?;
        states.push(sample.state.clone());
        sens.extend(sample.sensitivities.column_iter().map(|c| c.into_owned()));
        samples.push((mu, sample.sensitivities));
    }
    let reference = states[0].clone();
    let space = RomSpace::from_snapshots(
        reference,
        &DMatrix::from_columns(&states),
        &DMatrix::from_columns(&sens),
        DEFAULT_RANK_TOLERANCE,
    )
    .map_err(|e| e.to_string())?;
    Ok((space, samples))
}

fn criterion_3() -> Check {
    let model = BurgersModel::default();
    let mus = [[0.625, 0.0, 0.0, 0.0], [0.4, 0.3, -0.1, 0.2], [0.9, -0.2, 0.2, -0.4]];
    let (space, samples) = training_space(&model, &mus)?;
    let rom = RomInstance::lspg(&model, space).map_err(|e| e.to_string())?;
    let (mut res, mut sens_err) = (0.0_f64, 0.0_f64);
    for (mu, s) in &samples {
        let report = rom.solve(mu, &DVector::zeros(rom.basis_size())).map_err(|e| e.to_string())?;
        res = res.max(report.residual_norm);
        let reduced = rom.reduced_sens_minerr(&report.y, mu).map_err(|e| e.to_string())?;
        let lifted = rom.basis() * reduced;
        sens_err = sens_err.max((&lifted - s).norm() / s.norm());
    }
    ensure(
        res <= 1e-20 && sens_err <= 1e-9,
        format!("{} training points: max residual {res:.2e}, max sensitivity error {sens_err:.2e}", samples.len()),
    )
}

fn criterion_4() -> Check {
    let model = BurgersModel::default();
    let train = [
        [0.3, 0.1, 0.0, 0.0],
        [0.5, -0.3, 0.1, 0.2],
        [0.7, 0.4, -0.2, -0.3],
        [0.95, 0.0, 0.2, 0.4],
        [0.6, -0.1, -0.25, 0.5],
    ];
    let (space, _) = training_space(&model, &train)?;
    let full = space.combined.clone();
    let sizes = [2, 5, 9, 14, full.ncols()];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pairs, mut worst) = (0, f64::NEG_INFINITY);
    for _ in 0..5 {
        let mu = random_feasible(&model, &mut rng);
        let mut residuals = Vec::new();
        for &k in &sizes {
            let mut sub = space.clone();
            sub.combined = full.columns(0, k).into_owned();
            let rom = RomInstance::lspg(&model, sub).map_err(|e| e.to_string())?;
            residuals.push(rom.evaluate(&mu).map_err(|e| e.to_string())?.report.residual_norm);
        }
        for w in residuals.windows(2) {
            pairs += 1;
            worst = worst.max(w[1] - w[0]);
        }
    }
    ensure(
        pairs == 20 && worst <= 1e-12,
        format!("{pairs} nested pairs: largest residual increase {worst:.2e}"),
    )
}

fn criterion_5() -> Check {
    let tau = 0.1;
    let eps = 1e-2;
    // (rho, expected epsilon')
    let table = [
        (-1.0, 1e-3),
        (0.2, 1e-3),
        (0.25, 1e-2),
        (0.4, 1e-2),
        (0.5, 1e-1),
        (2.0, 1e-1),
        (3.0, 1e-2),
        (4.0, 1e-2),
        (4.5, 1e-3),
    ];
    let tr = TrustRegionState::new(eps, tau).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    for (rho, expected) in table {
        let got = adapt_epsilon(tr, rho).epsilon;
        if (got - expected).abs() > 1e-15 * expected {
            bad.push(format!("rho {rho}: {got:e} != {expected:e}"));
        }
    }
    ensure(bad.is_empty(), if bad.is_empty() { "9 cases match".into() } else { bad.join("; ") })
}

const COMPARE_CONFIG: &str = r#"{
    "model": {"kind": "burgers", "n": 256, "n_params": 4},
    "mode": "compare",
    "seed": 7,
    "output_dir": "OUT"
}"#;

fn compare_run(dir: &Path) -> std::result::Result<(RunConfig, Summary, Duration), String> {
    let text = COMPARE_CONFIG.replace("OUT", &dir.display().to_string());
    let config = RunConfig::from_json(&text).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let summary = run(&config).map_err(|e| e.to_string())?;
    Ok((config, summary, start.elapsed()))
}

fn criterion_6(summary: &Summary, t: Duration) -> Check {
    let (hdm, prog) = (&summary.runs[0], &summary.runs[1]);
    let err = prog.relative_parameter_error.unwrap_or(f64::INFINITY);
    ensure(
        2 * prog.hdm_evaluations <= hdm.hdm_evaluations && err < 1e-4 && t < Duration::from_secs(600),
        format!(
            "full-model solves {} (progressive) vs {} (nested), parameter error {err:.2e}, {t:.2?}",
            prog.hdm_evaluations, hdm.hdm_evaluations
        ),
    )
}

fn criterion_7(summary: &Summary) -> Check {
    let prog = &summary.runs[1];
    let orders = prog.objective_reduction_orders();
    ensure(
        orders >= 8.0,
        format!(
            "objective {:.3e} -> {:.3e}, {orders:.1} orders",
            prog.initial_objective, prog.final_objective
        ),
    )
}

fn criterion_8(config: &RunConfig) -> Check {
    let model = config.build_model();
    let domain = model.domain();
    let target_mu = config.target(&domain);
    let target = solve_hdm(model.as_ref(), &target_mu, &model.initial_guess(&target_mu), &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let objective = InverseDesignObjective::new(target.state);
    let mu0 = config.start(&domain);
    let opts = config.progressive_options();
    let base = progressive_optimize(model.as_ref(), &objective, &mu0, &opts).map_err(|e| e.to_string())?;
    let eps0 = base.log.subproblems[0].epsilon;
    let mut lines = vec![format!("default eps0 {eps0:.2e}: {} solves", base.log.summary.hdm_evaluations)];
    let mut ok = true;
    for scale in [1e-4, 1e4] {
        let mut scaled = opts.clone();
        scaled.epsilon0 = Some(eps0 * scale);
        let out = progressive_optimize(model.as_ref(), &objective, &mu0, &scaled).map_err(|e| e.to_string())?;
        let err = (&out.mu_best - &target_mu).norm() / target_mu.norm();
        let n = out.log.summary.hdm_evaluations;
        ok &= err < 1e-4 && n <= base.log.summary.hdm_evaluations + 5;
        lines.push(format!("x{scale:e}: {n} solves, error {err:.2e}"));
    }
    ensure(ok, lines.join(", "))
}

fn criterion_9(first: &Path) -> Check {
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    compare_run(second.path())?;
    let mut checked = 0;
    for sub in ["hdm", "progressive"] {
        let a = fs::read(first.join(sub).join("runlog.csv")).map_err(|e| e.to_string())?;
        let b = fs::read(second.path().join(sub).join("runlog.csv")).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{sub}/runlog.csv differs between identical runs"));
        }
        checked += a.len();
    }
    Ok(format!("two compare runs, {checked} CSV bytes identical"))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, result: Check| {
        match &result {
            Ok(msg) => println!("criterion {n} PASS  {name}: {msg}"),
            Err(msg) => {
                failures += 1;
                println!("criterion {n} FAIL  {name}: {msg}");
            }
        }
    };
    report(1, "low-rank SVD updates", criterion_1());
    report(2, "gradient consistency", criterion_2());
    report(3, "training-point exactness", criterion_3());
    report(4, "nested-basis residual monotonicity", criterion_4());
    report(5, "trust-region adaptation table", criterion_5());

    let dir = tempfile::tempdir().expect("temporary directory");
    match compare_run(dir.path()) {
        Ok((config, summary, t)) => {
            report(6, "full-model solve savings", criterion_6(&summary, t));
            report(7, "objective reduction", criterion_7(&summary));
            report(8, "initial trust-region robustness", criterion_8(&config));
            report(9, "determinism", criterion_9(dir.path()));
        }
        Err(e) => {
            for (n, name) in [
                (6, "full-model solve savings"),
                (7, "objective reduction"),
                (8, "initial trust-region robustness"),
                (9, "determinism"),
            ] {
                report(n, name, Err(format!("compare run failed: {e}")));
            }
        }
    }
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
