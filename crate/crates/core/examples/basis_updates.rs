//! Grow and shift a factored basis with low-rank updates instead of
//! recomputing the SVD, and compare against a fresh decomposition.

use progrom::basis::{brand_append, brand_translate, thin_svd, DEFAULT_RANK_TOLERANCE};
use progrom::linalg::hstack;
use progrom::{DMatrix, DVector};

fn main() -> progrom::Result<()> {
    let x = DMatrix::from_fn(200, 6, |i, j| ((i * (j + 1)) as f64 * 0.01).sin());
    let y = DMatrix::from_fn(200, 3, |i, j| ((i + 7 * j) as f64 * 0.03).cos());
    let shift = DVector::from_fn(200, |i, _| 1e-2 * (i as f64 / 200.0));

    let f = thin_svd(&x, DEFAULT_RANK_TOLERANCE)?;
    let appended = brand_append(&f, &y)?;
    let direct = thin_svd(&hstack(&x, &y), DEFAULT_RANK_TOLERANCE)?;
    println!("append: rank {} (direct {})", appended.rank(), direct.rank());
    for (a, b) in appended.singular_values.iter().zip(direct.singular_values.iter()) {
        println!("  sigma {a:.12e}  direct {b:.12e}");
    }

    let translated = brand_translate(&appended, &shift)?;
    let expected = appended.reconstruct() + progrom::linalg::repeat_column(&shift, appended.ncols());
    let err = (translated.reconstruct() - &expected).norm() / expected.norm();
    println!("translate: relative reconstruction error {err:.3e}");
    Ok(())
}
