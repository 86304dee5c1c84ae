use nalgebra::DVector;

/// A scalar quantity of interest `F(w, μ)` with its partial derivatives.
pub trait Functional {
    fn value(&self, w: &DVector<f64>, mu: &DVector<f64>) -> f64;
    fn partial_state(&self, w: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64>;
    fn partial_param(&self, w: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64>;
}

/// `½‖w − w_target‖²`, the state-matching objective of inverse design.
#[derive(Debug, Clone)]
pub struct InverseDesignObjective {
    pub target: DVector<f64>,
}

impl InverseDesignObjective {
    pub fn new(target: DVector<f64>) -> Self {
        Self { target }
    }
}

impl Functional for InverseDesignObjective {
    fn value(&self, w: &DVector<f64>, _mu: &DVector<f64>) -> f64 {
        0.5 * (w - &self.target).norm_squared()
    }

    fn partial_state(&self, w: &DVector<f64>, _mu: &DVector<f64>) -> DVector<f64> {
        w - &self.target
    }

    fn partial_param(&self, _w: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(mu.len())
    }
}
