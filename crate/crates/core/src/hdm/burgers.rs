use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{HdmModel, ParameterDomain};

/// Steady viscous Burgers equation on (0, 1),
///
/// `−ν u_xx + u u_x = Σᵢ μᵢ sin(iπx)`, `u(0) = 1`, `u(1) = −1`,
///
/// discretized with second-order central differences on `N` uniform
/// interior nodes. Each nodal equation is multiplied by the grid spacing
/// (a cell-integrated residual) so that residual norms stay O(1) as the
/// grid is refined.
#[derive(Debug, Clone)]
pub struct BurgersModel {
    n: usize,
    viscosity: f64,
    n_params: usize,
    left: f64,
    right: f64,
    domain: ParameterDomain,
}

impl BurgersModel {
    pub const DEFAULT_NODES: usize = 256;
    pub const DEFAULT_VISCOSITY: f64 = 0.05;
    pub const DEFAULT_PARAMS: usize = 4;

    pub fn new(n: usize, viscosity: f64, n_params: usize) -> Self {
        assert!(n >= 2, "need at least two interior nodes");
        assert!(viscosity > 0.0, "viscosity must be positive");
        Self {
            n,
            viscosity,
            n_params,
            left: 1.0,
            right: -1.0,
            domain: Self::default_domain(n_params),
        }
    }

    /// The default parameter box. The forcing's mean `∫₀¹ f dx` is kept
    /// positive: when it approaches zero the shock can sit anywhere in the
    /// interior and the steady state becomes extremely sensitive to `μ`
    /// (state sensitivities of order 10⁴ at `μ = 0`). With a positive mean
    /// the shock is held in a layer near `x = 1`.
    ///
    /// `μ₁ ∈ [0.25, 1]`, other odd modes in `[−0.25, 0.25]`, even modes
    /// (which have zero mean) in `[−0.5, 0.5]`.
    pub fn default_domain(n_params: usize) -> ParameterDomain {
        let mut lower = Vec::with_capacity(n_params);
        let mut upper = Vec::with_capacity(n_params);
        for i in 1..=n_params {
            let (l, u) = match i {
                1 => (0.25, 1.0),
                i if i % 2 == 1 => (-0.25, 0.25),
                _ => (-0.5, 0.5),
            };
            lower.push(l);
            upper.push(u);
        }
        ParameterDomain {
            lower,
            upper,
            fixed: Vec::new(),
        }
    }

    pub fn with_domain(mut self, domain: ParameterDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (1..=self.n).map(move |i| i as f64 * h)
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn source(&self, x: f64, mu: &DVector<f64>) -> f64 {
        mu.iter()
            .enumerate()
            .map(|(i, m)| m * ((i + 1) as f64 * PI * x).sin())
            .sum()
    }

    fn neighbors(&self, w: &DVector<f64>, i: usize) -> (f64, f64) {
        let west = if i == 0 { self.left } else { w[i - 1] };
        let east = if i + 1 == self.n { self.right } else { w[i + 1] };
        (west, east)
    }
}

impl Default for BurgersModel {
    fn default() -> Self {
        Self::new(
            Self::DEFAULT_NODES,
            Self::DEFAULT_VISCOSITY,
            Self::DEFAULT_PARAMS,
        )
    }
}

impl HdmModel for BurgersModel {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        self.n_params
    }

    fn domain(&self) -> ParameterDomain {
        self.domain.clone()
    }

    fn residual(&self, w: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        let h = self.spacing();
        let nu = self.viscosity;
        DVector::from_iterator(
            self.n,
            self.nodes().enumerate().map(|(i, x)| {
                let (west, east) = self.neighbors(w, i);
                let u = w[i];
                let diffusion = -nu * (east - 2.0 * u + west) / h;
                let convection = 0.5 * u * (east - west);
                diffusion + convection - h * self.source(x, mu)
            }),
        )
    }

    fn jacobian_state(&self, w: &DVector<f64>, _mu: &DVector<f64>) -> DMatrix<f64> {
        let h = self.spacing();
        let nu = self.viscosity;
        let mut jac = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (west, east) = self.neighbors(w, i);
            let u = w[i];
            jac[(i, i)] = 2.0 * nu / h + 0.5 * (east - west);
            if i > 0 {
                jac[(i, i - 1)] = -nu / h - 0.5 * u;
            }
            if i + 1 < self.n {
                jac[(i, i + 1)] = -nu / h + 0.5 * u;
            }
        }
        jac
    }

    fn jacobian_param(&self, _w: &DVector<f64>, _mu: &DVector<f64>) -> DMatrix<f64> {
        let h = self.spacing();
        let xs: Vec<f64> = self.nodes().collect();
        DMatrix::from_fn(self.n, self.n_params, |i, j| {
            -h * ((j + 1) as f64 * PI * xs[i]).sin()
        })
    }

    /// Linear interpolant of the boundary values.
    fn initial_guess(&self, _mu: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n,
            self.nodes().map(|x| self.left + (self.right - self.left) * x),
        )
    }
}
