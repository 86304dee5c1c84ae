//! Dense linear-algebra helpers shared by the other modules.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative pivot size below which a dense factorization is treated as singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

pub fn ensure_finite_matrix(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} contains non-finite entries")))
    }
}

pub fn ensure_finite_vector(name: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} contains non-finite entries")))
    }
}

/// Dense LU factorization with partial pivoting and a relative singularity check.
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::LinearSolve(format!(
                "matrix is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        let lu = a.lu();
        let u = lu.u();
        let diag = u.diagonal();
        let max = diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if !(max > 0.0) || !(min > SINGULAR_PIVOT_TOL * max) {
            return Err(Error::LinearSolve(format!(
                "singular matrix (pivot ratio {:e})",
                if max > 0.0 { min / max } else { 0.0 }
            )));
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.lu
            .solve(b)
            .ok_or_else(|| Error::LinearSolve("LU back-substitution failed".into()))
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(b)
            .ok_or_else(|| Error::LinearSolve("LU back-substitution failed".into()))
    }
}

/// Thin Householder QR of a tall matrix, used for dense least-squares solves.
pub struct ThinQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl ThinQr {
    /// Factors `a` (m×n, m ≥ n) and checks that it has full column rank,
    /// relative to `rank_tol` times the largest diagonal entry of R.
    pub fn new(a: &DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        let (m, n) = a.shape();
        if m < n {
            return Err(Error::invalid(format!(
                "least-squares matrix is {m}x{n}; need at least as many rows as columns"
            )));
        }
        let qr = a.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let max = r.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let deficient = r
            .diagonal()
            .iter()
            .filter(|v| !(v.abs() > rank_tol * max) || max == 0.0)
            .count();
        if deficient > 0 {
            return Err(Error::RankDeficient {
                columns: n,
                deficient,
            });
        }
        Ok(Self { q, r })
    }

    /// Solves min ‖A X − B‖_F column by column.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let rhs = self.q.tr_mul(b);
        self.r
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::LinearSolve("triangular solve failed".into()))
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let rhs = self.q.tr_mul(b);
        self.r
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::LinearSolve("triangular solve failed".into()))
    }
}

/// Least-squares solve of min ‖A X − B‖ by thin QR.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    ThinQr::new(a, rank_tol)?.solve(b)
}

/// Modified Gram–Schmidt with one reorthogonalization pass. Columns whose norm
/// after orthogonalization falls below `drop_tol` times their original norm
/// (or is exactly zero) are discarded.
pub fn modified_gram_schmidt(a: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(a.ncols());
    for j in 0..a.ncols() {
        let original = a.column(j).norm();
        if original == 0.0 {
            continue;
        }
        let mut v: DVector<f64> = a.column(j).into_owned();
        for _pass in 0..2 {
            for q in &kept {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > drop_tol * original {
            kept.push(v / norm);
        }
    }
    columns_to_matrix(a.nrows(), &kept)
}

pub fn columns_to_matrix(nrows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nrows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Horizontal concatenation `[A B]`.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Largest absolute entry of `QᵀQ − I`.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.tr_mul(q);
    let mut err = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((g[(i, j)] - target).abs());
        }
    }
    err
}

/// Sine of the largest principal angle between the column spaces of two
/// matrices with orthonormal columns. Returns 1 if the dimensions differ.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // ‖(I − AAᵀ)B‖₂ equals the sine of the largest principal angle.
    let residual = b - a * a.tr_mul(b);
    residual.singular_values().max()
}

/// Outer product `a·1ᵀ` with `n` columns.
pub fn repeat_column(a: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), n, |i, _| a[i])
}
