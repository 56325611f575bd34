//! Bridge regression: squared loss plus an ℓp penalty on the coefficients.

use nalgebra::{DMatrix, DVector};

use super::{add_lp_gradient, lp_penalty, RecordLosses, Target, DEFAULT_LP_SMOOTHING};
use crate::error::{Error, Result};

/// `U(β) = μ/(2n) ‖y - Xβ‖² + λ Σ |β_j|^p` over `n` training rows.
#[derive(Clone, Debug)]
pub struct BridgeTarget {
    design: DMatrix<f64>,
    response: DVector<f64>,
    mu: f64,
    lambda: f64,
    p: f64,
    smoothing: f64,
}

impl BridgeTarget {
    pub fn new(design: DMatrix<f64>, response: Vec<f64>, mu: f64, lambda: f64, p: f64) -> Result<Self> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return Err(Error::invalid("bridge target", "design matrix is empty"));
        }
        if design.nrows() != response.len() {
            return Err(Error::DimensionMismatch {
                expected: design.nrows(),
                found: response.len(),
            });
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid("bridge target", format!("mu must be positive, got {mu}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid("bridge target", format!("lambda must be non-negative, got {lambda}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid("bridge target", format!("p must lie in (0, 1], got {p}")));
        }
        Ok(Self {
            design,
            response: DVector::from_vec(response),
            mu,
            lambda,
            p,
            smoothing: DEFAULT_LP_SMOOTHING,
        })
    }

    pub fn with_smoothing(mut self, smoothing: f64) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.design.nrows()
    }

    fn residual(&self, beta: &[f64]) -> DVector<f64> {
        &self.response - &self.design * DVector::from_column_slice(beta)
    }

    fn row_residual(&self, i: usize, beta: &[f64]) -> f64 {
        let fit: f64 = self.design.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
        self.response[i] - fit
    }
}

impl Target for BridgeTarget {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn potential(&self, beta: &[f64]) -> f64 {
        let r = self.residual(beta);
        self.mu / (2.0 * self.n_rows() as f64) * r.norm_squared() + lp_penalty(beta, self.p, self.lambda)
    }

    fn gradient_into(&self, beta: &[f64], grad: &mut [f64]) {
        let r = self.residual(beta);
        let g = self.design.tr_mul(&r) * (-self.mu / self.n_rows() as f64);
        grad.copy_from_slice(g.as_slice());
        if self.lambda > 0.0 {
            add_lp_gradient(beta, self.p, self.lambda, self.smoothing, grad);
        }
    }
}

/// Records are training rows with loss `μ/2 r_i²`; the penalty is shared.
impl RecordLosses for BridgeTarget {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn n_records(&self) -> usize {
        self.n_rows()
    }

    fn record_potential(&self, i: usize, beta: &[f64]) -> f64 {
        0.5 * self.mu * self.row_residual(i, beta).powi(2)
    }

    fn add_record_gradient(&self, i: usize, beta: &[f64], grad: &mut [f64]) {
        let scale = -self.mu * self.row_residual(i, beta);
        for (g, a) in grad.iter_mut().zip(self.design.row(i).iter()) {
            *g += scale * a;
        }
    }

    fn shared_potential(&self, beta: &[f64]) -> f64 {
        lp_penalty(beta, self.p, self.lambda)
    }

    fn add_shared_gradient(&self, beta: &[f64], grad: &mut [f64]) {
        if self.lambda > 0.0 {
            add_lp_gradient(beta, self.p, self.lambda, self.smoothing, grad);
        }
    }
}
