//! Snapshot compression and incremental basis maintenance.
//!
//! A [`FactoredBasis`] keeps the thin SVD factors `U Σ Vᵀ` of a snapshot
//! block so that columns can be appended and translated without
//! recomputing the decomposition from scratch. [`RomSpace`] pairs a state
//! basis and a sensitivity basis with the affine reference vector and the
//! orthonormalized trial basis handed to the reduced model.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{
    columns_to_matrix, ensure_finite_matrix, ensure_finite_vector, hstack,
    modified_gram_schmidt, repeat_column,
};
use crate::{Error, Result};

/// Default relative singular-value cutoff.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Thin SVD factors of a data block `X ≈ U diag(Σ) Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredBasis {
    /// `U`, N×r with orthonormal columns.
    pub left_vectors: DMatrix<f64>,
    /// `Σ`, non-increasing and nonnegative.
    pub singular_values: DVector<f64>,
    /// `V`, n×r with orthonormal columns (n = number of data columns).
    pub right_vectors: DMatrix<f64>,
    pub rank_tolerance: f64,
}

impl FactoredBasis {
    /// Factors of an all-zero `nrows × ncols` block.
    pub fn zero(nrows: usize, ncols: usize, rank_tolerance: f64) -> Self {
        Self {
            left_vectors: DMatrix::zeros(nrows, 0),
            singular_values: DVector::zeros(0),
            right_vectors: DMatrix::zeros(ncols, 0),
            rank_tolerance,
        }
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Row dimension of the represented block.
    pub fn nrows(&self) -> usize {
        self.left_vectors.nrows()
    }

    /// Number of data columns represented.
    pub fn ncols(&self) -> usize {
        self.right_vectors.nrows()
    }

    pub fn largest_singular_value(&self) -> f64 {
        self.singular_values.iter().copied().next().unwrap_or(0.0)
    }

    /// `U diag(Σ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.left_vectors.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.right_vectors.transpose()
    }
}

/// Keeps the leading singular triplets with `σ > cutoff`, sorted non-increasing.
fn truncated_factors(
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
    cutoff: f64,
    rank_tolerance: f64,
) -> FactoredBasis {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let keep: Vec<usize> = order.into_iter().filter(|&i| s[i] > cutoff).collect();
    let left = columns_to_matrix(
        u.nrows(),
        &keep.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>(),
    );
    let right = columns_to_matrix(
        v.nrows(),
        &keep.iter().map(|&i| v.column(i).into_owned()).collect::<Vec<_>>(),
    );
    FactoredBasis {
        left_vectors: left,
        singular_values: DVector::from_iterator(keep.len(), keep.iter().map(|&i| s[i])),
        right_vectors: right,
        rank_tolerance,
    }
}

/// Dense SVD `K = C S Dᵀ` returning `(C, S, D)`.
fn dense_svd(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = nalgebra::SVD::try_new(k.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidState("SVD iteration did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    Ok((u, svd.singular_values, vt.transpose()))
}

/// Thin SVD truncated at the numerical rank `σ_i > rank_tolerance · σ₁`.
pub fn thin_svd(x: &DMatrix<f64>, rank_tolerance: f64) -> Result<FactoredBasis> {
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Err(Error::invalid(format!("cannot factor an empty {m}x{n} matrix")));
    }
    ensure_finite_matrix("snapshot matrix", x)?;
    let (u, s, v) = dense_svd(x)?;
    let sigma1 = s.iter().fold(0.0_f64, |a, b| a.max(*b));
    Ok(truncated_factors(u, s, v, rank_tolerance * sigma1, rank_tolerance))
}

/// Result of [`pod`]: the basis plus a flag set when the requested size
/// exceeded the numerical rank and was clipped.
#[derive(Debug, Clone)]
pub struct PodBasis {
    pub basis: DMatrix<f64>,
    pub requested: usize,
    pub truncated_to_rank: bool,
}

/// Proper orthogonal decomposition: the first `k` left singular vectors of `x`.
pub fn pod(x: &DMatrix<f64>, k: usize, rank_tolerance: f64) -> Result<PodBasis> {
    if k == 0 {
        return Err(Error::invalid("POD basis size must be at least 1"));
    }
    let f = thin_svd(x, rank_tolerance)?;
    let kept = k.min(f.rank());
    Ok(PodBasis {
        basis: f.left_vectors.columns(0, kept).into_owned(),
        requested: k,
        truncated_to_rank: kept < k,
    })
}

/// Restricts factors to their leading `k` triplets.
fn leading(f: FactoredBasis, k: Option<usize>) -> (FactoredBasis, bool) {
    match k {
        Some(k) if k < f.rank() => {
            let truncated = FactoredBasis {
                left_vectors: f.left_vectors.columns(0, k).into_owned(),
                singular_values: f.singular_values.rows(0, k).into_owned(),
                right_vectors: f.right_vectors.columns(0, k).into_owned(),
                rank_tolerance: f.rank_tolerance,
            };
            (truncated, false)
        }
        Some(k) => {
            let clipped = k > f.rank();
            (f, clipped)
        }
        None => (f, false),
    }
}

/// Output of [`state_sens_pod`].
#[derive(Debug, Clone)]
pub struct StateSensBasis {
    pub state: FactoredBasis,
    pub sens: FactoredBasis,
    /// Orthonormalized `[Φ_state Φ_sens]`.
    pub combined: DMatrix<f64>,
    /// Set when a requested size exceeded the block's numerical rank.
    pub truncated_to_rank: bool,
}

/// Factors of a block that may be numerically zero (rank 0 allowed).
fn factor_block(x: &DMatrix<f64>, rank_tolerance: f64) -> Result<FactoredBasis> {
    if x.ncols() == 0 {
        return Ok(FactoredBasis::zero(x.nrows(), 0, rank_tolerance));
    }
    if x.iter().all(|v| *v == 0.0) {
        ensure_finite_matrix("snapshot matrix", x)?;
        return Ok(FactoredBasis::zero(x.nrows(), x.ncols(), rank_tolerance));
    }
    thin_svd(x, rank_tolerance)
}

/// State-sensitivity POD: separate PODs of the state and sensitivity
/// snapshots, concatenated and orthonormalized by modified Gram–Schmidt.
///
/// `x_state` is taken as given; callers that work with an affine reference
/// subtract it beforehand (see [`RomSpace::from_snapshots`]). `None` sizes
/// keep the full numerical rank.
pub fn state_sens_pod(
    x_state: &DMatrix<f64>,
    x_sens: &DMatrix<f64>,
    k_state: Option<usize>,
    k_sens: Option<usize>,
    rank_tolerance: f64,
) -> Result<StateSensBasis> {
    if x_state.ncols() == 0 {
        return Err(Error::invalid("at least one state snapshot is required"));
    }
    if x_sens.ncols() > 0 && x_sens.nrows() != x_state.nrows() {
        return Err(Error::invalid(format!(
            "state snapshots have {} rows but sensitivity snapshots have {}",
            x_state.nrows(),
            x_sens.nrows()
        )));
    }
    let (state, clip_state) = leading(factor_block(x_state, rank_tolerance)?, k_state);
    let (sens, clip_sens) = leading(
        factor_block(
            &if x_sens.ncols() == 0 {
                DMatrix::zeros(x_state.nrows(), 0)
            } else {
                x_sens.clone()
            },
            rank_tolerance,
        )?,
        k_sens,
    );
    let combined = combine(&state, &sens);
    Ok(StateSensBasis {
        state,
        sens,
        combined,
        truncated_to_rank: clip_state || clip_sens,
    })
}

fn combine(state: &FactoredBasis, sens: &FactoredBasis) -> DMatrix<f64> {
    let stacked = hstack(&state.left_vectors, &sens.left_vectors);
    modified_gram_schmidt(&stacked, state.rank_tolerance.max(sens.rank_tolerance))
}

/// A unit vector orthogonal to the columns of `u`, or zero when none exists.
fn orthogonal_unit_vector(u: &DMatrix<f64>) -> DVector<f64> {
    let m = u.nrows();
    if u.ncols() >= m {
        return DVector::zeros(m);
    }
    // The coordinate axis least represented in span(U).
    let axis = (0..m)
        .min_by(|&a, &b| {
            u.row(a)
                .norm_squared()
                .total_cmp(&u.row(b).norm_squared())
                .then(a.cmp(&b))
        })
        .unwrap_or(0);
    let mut v = DVector::zeros(m);
    v[axis] = 1.0;
    for _ in 0..2 {
        let c = u.tr_mul(&v);
        v -= u * c;
    }
    let norm = v.norm();
    if norm > 0.0 {
        v / norm
    } else {
        DVector::zeros(m)
    }
}

/// Thin SVD of `[X Y]` given the factors of `X` (Brand's append update).
pub fn brand_append(f: &FactoredBasis, y: &DMatrix<f64>) -> Result<FactoredBasis> {
    if y.nrows() != f.nrows() {
        return Err(Error::invalid(format!(
            "appended block has {} rows, basis has {}",
            y.nrows(),
            f.nrows()
        )));
    }
    ensure_finite_matrix("appended block", y)?;
    let k = y.ncols();
    if k == 0 {
        return Ok(f.clone());
    }
    let tol = f.rank_tolerance;
    let r = f.rank();
    let m = f.nrows();
    let u = &f.left_vectors;

    // Components of Y inside and orthogonal to span(U), with one
    // reorthogonalization sweep.
    let mut coeffs = u.tr_mul(y);
    let mut p_bar = y - u * &coeffs;
    let correction = u.tr_mul(&p_bar);
    p_bar -= u * &correction;
    coeffs += correction;

    let y_scale = (0..k).map(|j| y.column(j).norm()).fold(0.0_f64, f64::max);
    let scale = f.largest_singular_value().max(y_scale);

    // Column-pivoted QR: P̄ = P R_A, with numerically null rows of R_A zeroed.
    let p_rows = m.min(k);
    let qr = p_bar.clone().col_piv_qr();
    let p = qr.q();
    let mut r_a = qr.r();
    for i in 0..p_rows {
        if !(r_a[(i, i)].abs() > tol * scale) {
            r_a.row_mut(i).fill(0.0);
        }
    }
    qr.p().inv_permute_columns(&mut r_a);

    let mut kmat = DMatrix::zeros(r + p_rows, r + k);
    for i in 0..r {
        kmat[(i, i)] = f.singular_values[i];
    }
    kmat.view_mut((0, r), (r, k)).copy_from(&coeffs);
    kmat.view_mut((r, r), (p_rows, k)).copy_from(&r_a);

    let (c, s, d) = dense_svd(&kmat)?;
    let new_u = hstack(u, &p) * c;
    let n = f.ncols();
    let mut v_block = DMatrix::zeros(n + k, r + k);
    v_block.view_mut((0, 0), (n, r)).copy_from(&f.right_vectors);
    v_block
        .view_mut((n, r), (k, k))
        .copy_from(&DMatrix::identity(k, k));
    let new_v = v_block * d;
    let cutoff = tol * s.max().max(scale);
    Ok(truncated_factors(new_u, s, new_v, cutoff, tol))
}

/// Thin SVD of `X + a·1ᵀ` given the factors of `X` (Brand's translate update).
pub fn brand_translate(f: &FactoredBasis, a: &DVector<f64>) -> Result<FactoredBasis> {
    if a.len() != f.nrows() {
        return Err(Error::invalid(format!(
            "translation vector has length {}, basis has {} rows",
            a.len(),
            f.nrows()
        )));
    }
    ensure_finite_vector("translation vector", a)?;
    let tol = f.rank_tolerance;
    let r = f.rank();
    let n = f.ncols();
    if n == 0 {
        return Ok(f.clone());
    }
    let u = &f.left_vectors;
    let v = &f.right_vectors;

    let ones = DVector::from_element(n, 1.0);
    let nvec = v.tr_mul(&ones);
    let mut q = &ones - v * &nvec;
    let qc = v.tr_mul(&q);
    q -= v * qc;
    let mut q_norm = q.norm();
    let q_unit = if q_norm > tol * (n as f64).sqrt() {
        q / q_norm
    } else {
        q_norm = 0.0;
        DVector::zeros(n)
    };

    let mut mvec = u.tr_mul(a);
    let mut p = a - u * &mvec;
    let pc = u.tr_mul(&p);
    p -= u * &pc;
    mvec += pc;

    let scale = f
        .largest_singular_value()
        .max(a.norm() * (n as f64).sqrt());
    let p_norm = p.norm();
    let (r_hat, v_new) = if p_norm > tol * scale {
        (p_norm, p / p_norm)
    } else {
        (0.0, orthogonal_unit_vector(u))
    };

    let mut kmat = DMatrix::zeros(r + 1, r + 1);
    for i in 0..r {
        kmat[(i, i)] = f.singular_values[i];
    }
    kmat.view_mut((0, 0), (r, r))
        .ger(1.0, &mvec, &nvec, 1.0);
    for i in 0..r {
        kmat[(i, r)] = q_norm * mvec[i];
        kmat[(r, i)] = r_hat * nvec[i];
    }
    kmat[(r, r)] = r_hat * q_norm;

    let (c, s, d) = dense_svd(&kmat)?;
    let new_u = hstack(u, &DMatrix::from_column_slice(a.len(), 1, v_new.as_slice())) * c;
    let new_v = hstack(v, &DMatrix::from_column_slice(n, 1, q_unit.as_slice())) * d;
    let cutoff = tol * s.max().max(scale);
    Ok(truncated_factors(new_u, s, new_v, cutoff, tol))
}

/// Affine trial subspace `w̄ + span(Φ)` with the per-block factors needed
/// to update it.
#[derive(Debug, Clone)]
pub struct RomSpace {
    /// Reference vector `w̄`.
    pub reference: DVector<f64>,
    /// Factors of the state snapshots offset by `reference`.
    pub state_basis: FactoredBasis,
    /// Factors of the sensitivity snapshots.
    pub sens_basis: FactoredBasis,
    /// Orthonormalized `[Φ_state Φ_sens]`.
    pub combined: DMatrix<f64>,
}

impl RomSpace {
    /// Builds the space from raw state snapshots (columns of `states`, not yet
    /// offset) and sensitivity snapshots, keeping every nonzero singular direction.
    pub fn from_snapshots(
        reference: DVector<f64>,
        states: &DMatrix<f64>,
        sens: &DMatrix<f64>,
        rank_tolerance: f64,
    ) -> Result<Self> {
        if states.nrows() != reference.len() {
            return Err(Error::invalid(format!(
                "reference has length {}, snapshots have {} rows",
                reference.len(),
                states.nrows()
            )));
        }
        let offset = states - repeat_column(&reference, states.ncols());
        let pod = state_sens_pod(&offset, sens, None, None, rank_tolerance)?;
        Ok(Self {
            reference,
            state_basis: pod.state,
            sens_basis: pod.sens,
            combined: pod.combined,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.reference.len()
    }

    /// Number of trial basis vectors `k_y`.
    pub fn basis_size(&self) -> usize {
        self.combined.ncols()
    }

    /// `w̄ + Φ y`.
    pub fn reconstruct(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.reference + &self.combined * y
    }

    /// Norm of the component of `v − w̄` outside span(Φ).
    pub fn projection_residual(&self, v: &DVector<f64>) -> f64 {
        let d = v - &self.reference;
        let proj = &self.combined * self.combined.tr_mul(&d);
        (d - proj).norm()
    }
}

/// Updates the space with a new reference vector and optional new state and
/// sensitivity snapshots (raw states; the new reference is subtracted here).
pub fn update_rob(
    space: &RomSpace,
    new_reference: &DVector<f64>,
    y_state: &DMatrix<f64>,
    y_sens: &DMatrix<f64>,
) -> Result<RomSpace> {
    let n = space.state_dim();
    if new_reference.len() != n {
        return Err(Error::invalid(format!(
            "new reference has length {}, space has dimension {n}",
            new_reference.len()
        )));
    }
    for (name, block) in [("state", y_state), ("sensitivity", y_sens)] {
        if block.ncols() > 0 && block.nrows() != n {
            return Err(Error::invalid(format!(
                "new {name} snapshots have {} rows, space has dimension {n}",
                block.nrows()
            )));
        }
    }

    let sens = if y_sens.ncols() > 0 {
        brand_append(&space.sens_basis, y_sens)?
    } else {
        space.sens_basis.clone()
    };

    let shift = &space.reference - new_reference;
    let translated = if shift.iter().all(|v| *v == 0.0) {
        space.state_basis.clone()
    } else {
        brand_translate(&space.state_basis, &shift)?
    };
    let state = if y_state.ncols() > 0 {
        let offset = y_state - repeat_column(new_reference, y_state.ncols());
        brand_append(&translated, &offset)?
    } else {
        translated
    };

    let combined = combine(&state, &sens);
    Ok(RomSpace {
        reference: new_reference.clone(),
        state_basis: state,
        sens_basis: sens,
        combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_error, subspace_distance};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Singular values from the eigenvalues of XᵀX, sorted non-increasing.
    fn eigen_oracle_singular_values(x: &DMatrix<f64>) -> Vec<f64> {
        let gram = x.tr_mul(x);
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut s: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    fn assert_valid(f: &FactoredBasis) {
        assert!(orthonormality_error(&f.left_vectors) < 1e-10);
        assert!(orthonormality_error(&f.right_vectors) < 1e-10);
        for w in f.singular_values.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(f.singular_values.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn thin_svd_identity() {
        let f = thin_svd(&DMatrix::identity(2, 2), DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(f.singular_values.as_slice(), &[1.0, 1.0]);
        let uvt = &f.left_vectors * f.right_vectors.transpose();
        assert!((uvt - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn thin_svd_diagonal() {
        let x = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).unwrap();
        assert!((f.singular_values[0] - 2.0).abs() < 1e-15);
        assert!((f.singular_values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thin_svd_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_matrix(&mut rng, 8, 5);
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).unwrap();
        let oracle = eigen_oracle_singular_values(&x);
        assert_eq!(f.rank(), 5);
        for (s, o) in f.singular_values.iter().zip(&oracle) {
            assert!((s - o).abs() < 1e-10, "{s} vs {o}");
        }
        assert_valid(&f);
        assert!((f.reconstruct() - &x).norm() < 1e-12);
    }

    #[test]
    fn thin_svd_rejects_non_finite() {
        let mut x = DMatrix::identity(3, 2);
        x[(1, 1)] = f64::NAN;
        assert!(matches!(
            thin_svd(&x, DEFAULT_RANK_TOLERANCE),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn thin_svd_reports_numerical_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 7, 2);
        let b = random_matrix(&mut rng, 2, 5);
        let f = thin_svd(&(a * b), DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(f.rank(), 2);
    }

    #[test]
    fn pod_dominant_axis() {
        let x = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let p = pod(&x, 1, DEFAULT_RANK_TOLERANCE).unwrap();
        assert!((p.basis[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!(p.basis[(1, 0)].abs() < 1e-15);
        assert!(!p.truncated_to_rank);
    }

    #[test]
    fn pod_full_rank_spans_snapshots() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_matrix(&mut rng, 9, 4);
        let p = pod(&x, 4, DEFAULT_RANK_TOLERANCE).unwrap();
        let residual = &x - &p.basis * p.basis.tr_mul(&x);
        assert!(residual.norm() < 1e-10);
    }

    #[test]
    fn pod_eckart_young_against_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(&mut rng, 6, 4);
        let oracle = eigen_oracle_singular_values(&x);
        let p = pod(&x, 2, DEFAULT_RANK_TOLERANCE).unwrap();
        let err = (&x - &p.basis * p.basis.tr_mul(&x)).norm();
        let expected = (oracle[2].powi(2) + oracle[3].powi(2)).sqrt();
        assert!((err - expected).abs() < 1e-9);
    }

    #[test]
    fn pod_flags_requests_beyond_rank() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let p = pod(&x, 2, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(p.basis.ncols(), 1);
        assert!(p.truncated_to_rank);
    }

    #[test]
    fn state_sens_pod_orthogonal_inputs() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let e2 = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        let b = state_sens_pod(&e1, &e2, None, None, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(b.combined.ncols(), 2);
        assert!((b.combined.column(0).abs() - e1.column(0)).norm() < 1e-15);
        assert!((b.combined.column(1).abs() - e2.column(0)).norm() < 1e-15);
    }

    #[test]
    fn state_sens_pod_drops_dependent_sensitivities() {
        let states = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let sens = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let b = state_sens_pod(&states, &sens, None, None, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(b.combined.ncols(), 2);
    }

    #[test]
    fn state_sens_pod_requires_state_snapshot() {
        let empty = DMatrix::zeros(3, 0);
        let sens = DMatrix::identity(3, 1);
        assert!(matches!(
            state_sens_pod(&empty, &sens, None, None, DEFAULT_RANK_TOLERANCE),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn append_in_span_keeps_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_matrix(&mut rng, 10, 3);
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).unwrap();
        let y = &x * DMatrix::from_column_slice(3, 1, &[0.5, -1.0, 2.0]);
        let g = brand_append(&f, &y).unwrap();
        let direct = nalgebra::SVD::new(hstack(&x, &y), false, false).singular_values;
        assert_eq!(g.rank(), 3);
        for i in 0..3 {
            assert!((g.singular_values[i] - direct[i]).abs() < 1e-10);
        }
        assert_valid(&g);
    }

    #[test]
    fn append_orthogonal_unit_column() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let e2 = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        let f = thin_svd(&e1, DEFAULT_RANK_TOLERANCE).unwrap();
        let g = brand_append(&f, &e2).unwrap();
        assert!((g.singular_values[0] - 1.0).abs() < 1e-15);
        assert!((g.singular_values[1] - 1.0).abs() < 1e-15);
        let span = hstack(&e1, &e2);
        assert!(subspace_distance(&span, &g.left_vectors) < 1e-14);
    }

    #[test]
    fn append_reconstructs_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = random_matrix(&mut rng, 10, 3);
        let y = random_matrix(&mut rng, 10, 2);
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).unwrap();
        let g = brand_append(&f, &y).unwrap();
        assert!((g.reconstruct() - hstack(&x, &y)).norm() < 1e-9);
        assert_valid(&g);
    }

    #[test]
    fn append_rejects_dimension_mismatch() {
        let f = thin_svd(&DMatrix::identity(3, 2), DEFAULT_RANK_TOLERANCE).unwrap();
        assert!(brand_append(&f, &DMatrix::zeros(4, 1)).is_err());
        assert!(brand_translate(&f, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn append_handles_duplicate_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = random_matrix(&mut rng, 8, 2);
        let extra = random_matrix(&mut rng, 8, 1);
        let y = hstack(&extra, &extra);
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).unwrap();
        let g = brand_append(&f, &y).unwrap();
        assert_eq!(g.rank(), 3);
        assert!((g.reconstruct() - hstack(&x, &y)).norm() < 1e-12);
        assert_valid(&g);
    }

    #[test]
    fn translate_by_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = random_matrix(&mut rng, 6, 3);
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).unwrap();
        let g = brand_translate(&f, &DVector::zeros(6)).unwrap();
        for i in 0..3 {
            assert!((g.singular_values[i] - f.singular_values[i]).abs() < 1e-12);
        }
        assert!((g.reconstruct() - x).norm() < 1e-12);
    }

    #[test]
    fn translate_identical_columns() {
        let e1 = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let f = thin_svd(&e1, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(f.rank(), 1);
        let g = brand_translate(&f, &DVector::from_column_slice(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(g.rank(), 1);
        assert!((g.singular_values[0] - 2.0).abs() < 1e-14);
        let expected = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        assert!((g.reconstruct() - expected).norm() < 1e-14);
    }

    #[test]
    fn translate_matches_direct_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let x = random_matrix(&mut rng, 12, 4);
        let a = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).unwrap();
        let g = brand_translate(&f, &a).unwrap();
        let target = &x + repeat_column(&a, 4);
        assert!((g.reconstruct() - &target).norm() < 1e-9);
        let direct = nalgebra::SVD::new(target, false, false).singular_values;
        for i in 0..g.rank() {
            assert!((g.singular_values[i] - direct[i]).abs() < 1e-10 * direct[0]);
        }
        assert_valid(&g);
    }

    #[test]
    fn translate_into_zero_matrix_drops_everything() {
        let w = DVector::from_column_slice(&[0.3, -1.2, 2.0, 0.7]);
        let x = DMatrix::from_column_slice(4, 1, w.as_slice());
        let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE).unwrap();
        let g = brand_translate(&f, &(-&w)).unwrap();
        assert_eq!(g.rank(), 0);
        assert_eq!(g.ncols(), 1);
    }

    fn raw_space(seed: u64) -> (DMatrix<f64>, DMatrix<f64>, RomSpace) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = random_matrix(&mut rng, 15, 3);
        let sens = random_matrix(&mut rng, 15, 4);
        let reference = states.column(0).into_owned();
        let space = RomSpace::from_snapshots(reference, &states, &sens, DEFAULT_RANK_TOLERANCE)
            .unwrap();
        (states, sens, space)
    }

    #[test]
    fn update_rob_noop() {
        let (_, _, space) = raw_space(31);
        let empty = DMatrix::zeros(15, 0);
        let updated = update_rob(&space, &space.reference.clone(), &empty, &empty).unwrap();
        assert_eq!(updated.state_basis, space.state_basis);
        assert_eq!(updated.sens_basis, space.sens_basis);
        assert!((updated.combined - space.combined).abs().max() < 1e-12);
    }

    #[test]
    fn update_rob_reoffset_matches_direct_pod() {
        let (states, sens, space) = raw_space(37);
        let new_ref = states.column(2).into_owned();
        let empty = DMatrix::zeros(15, 0);
        let updated = update_rob(&space, &new_ref, &empty, &empty).unwrap();
        let direct = RomSpace::from_snapshots(new_ref, &states, &sens, DEFAULT_RANK_TOLERANCE)
            .unwrap();
        assert_eq!(updated.state_basis.rank(), direct.state_basis.rank());
        assert!(
            subspace_distance(&direct.state_basis.left_vectors, &updated.state_basis.left_vectors)
                < 1e-8
        );
        assert!(orthonormality_error(&updated.combined) < 1e-10);
    }

    #[test]
    fn update_rob_spans_new_snapshots() {
        let (_, _, space) = raw_space(41);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let new_state = random_matrix(&mut rng, 15, 1);
        let new_sens = random_matrix(&mut rng, 15, 4);
        let new_ref = new_state.column(0).into_owned();
        let updated = update_rob(&space, &new_ref, &new_state, &new_sens).unwrap();
        assert!(updated.projection_residual(&new_state.column(0).into_owned()) < 1e-9);
        for j in 0..4 {
            let s = new_sens.column(j).into_owned();
            let proj = &updated.combined * updated.combined.tr_mul(&s);
            assert!((s - proj).norm() < 1e-9);
        }
        // The old reference is still reachable.
        assert!(updated.projection_residual(&space.reference) < 1e-9);
        assert!(orthonormality_error(&updated.combined) < 1e-10);
    }
}
