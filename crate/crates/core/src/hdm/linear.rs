use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HdmModel, ParameterDomain};
use crate::{Error, Result};

/// `R(w, μ) = A w − (b₀ + B μ)` with a fixed nonsingular `A`.
#[derive(Debug, Clone)]
pub struct LinearParametricModel {
    a: DMatrix<f64>,
    b0: DVector<f64>,
    b: DMatrix<f64>,
    domain: ParameterDomain,
}

impl LinearParametricModel {
    pub fn new(a: DMatrix<f64>, b0: DVector<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b0.len() != n || b.nrows() != n {
            return Err(Error::invalid(format!(
                "inconsistent shapes: A {}x{}, b0 {}, B {}x{}",
                a.nrows(),
                a.ncols(),
                b0.len(),
                b.nrows(),
                b.ncols()
            )));
        }
        let domain = ParameterDomain::uniform(b.ncols(), -10.0, 10.0);
        Ok(Self { a, b0, b, domain })
    }

    /// A diagonally dominant nonsymmetric test operator with random `b₀`, `B`.
    pub fn random(n: usize, n_params: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |i, j| {
            let base = match i.abs_diff(j) {
                0 => 4.0,
                1 => -1.0,
                _ => 0.0,
            };
            base + 0.2 * rng.random_range(-1.0..1.0) / n as f64
        });
        let b0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, n_params, |_, _| rng.random_range(-1.0..1.0));
        Self::new(a, b0, b).expect("shapes are consistent by construction")
    }

    /// Like [`random`](Self::random) but with a symmetric positive definite `A`.
    pub fn random_spd(n: usize, n_params: usize, seed: u64) -> Self {
        let mut model = Self::random(n, n_params, seed);
        let sym = (&model.a + model.a.transpose()) * 0.5;
        model.a = sym;
        model
    }

    pub fn with_domain(mut self, domain: ParameterDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn load(&self, mu: &DVector<f64>) -> DVector<f64> {
        &self.b0 + &self.b * mu
    }

    pub fn load_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }
}

impl HdmModel for LinearParametricModel {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn param_dim(&self) -> usize {
        self.b.ncols()
    }

    fn domain(&self) -> ParameterDomain {
        self.domain.clone()
    }

    fn residual(&self, w: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        &self.a * w - self.load(mu)
    }

    fn jacobian_state(&self, _w: &DVector<f64>, _mu: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn jacobian_param(&self, _w: &DVector<f64>, _mu: &DVector<f64>) -> DMatrix<f64> {
        -&self.b
    }
}
