//! Potential energies `U(x) = -log p(x)` up to a constant.
//!
//! Everything a sampler needs from a target is in [`Target`]: the dimension,
//! the potential and its gradient. Data-driven targets additionally expose
//! per-record losses through [`RecordLosses`] so they can be subsampled by a
//! [`StochasticTarget`].

mod bridge;
mod denoise;
mod records;
mod synthetic;

pub use bridge::BridgeTarget;
pub use denoise::{DenoiseParams, DenoiseTarget, FactorizationState};
pub use records::{Batch, BatchTarget, QuadraticRecords, RecordLosses, StochasticTarget};
pub use synthetic::{
    AsymmetricWell, DoubleWell, GaussianMixtureTarget, GaussianTarget, LpTarget, PiecewiseWell,
    QuadraticTarget, SpikySmooth,
};

/// Default smoothing added to `|x|^(1-p)` in ℓp gradients.
pub const DEFAULT_LP_SMOOTHING: f64 = 1e-8;

/// A differentiable potential energy.
///
/// Gradients of piecewise targets are right-hand derivatives at breakpoints.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn potential(&self, x: &[f64]) -> f64;

    /// Writes `∇U(x)` into `grad`, which has length [`Target::dim`].
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }
}

impl<T: Target + ?Sized> Target for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, x: &[f64]) -> f64 {
        (**self).potential(x)
    }
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient_into(x, grad)
    }
}

impl<T: Target + ?Sized> Target for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, x: &[f64]) -> f64 {
        (**self).potential(x)
    }
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient_into(x, grad)
    }
}

/// `sign(x)` with `sign(0) = +1`.
pub(crate) fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `λ Σ |x_i|^p`.
pub(crate) fn lp_penalty(x: &[f64], p: f64, lambda: f64) -> f64 {
    if p == 1.0 {
        lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    } else {
        lambda * x.iter().map(|v| v.abs().powf(p)).sum::<f64>()
    }
}

/// Adds the smoothed ℓp gradient `λ p sign(x) / (|x|^(1-p) + ε₀)` to `grad`.
pub(crate) fn add_lp_gradient(x: &[f64], p: f64, lambda: f64, smoothing: f64, grad: &mut [f64]) {
    for (g, v) in grad.iter_mut().zip(x) {
        let denom = if p == 1.0 { 1.0 } else { v.abs().powf(1.0 - p) } + smoothing;
        *g += lambda * p * sign(*v) / denom;
    }
}

/// Per-coordinate gradient error against central finite differences.
#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `|g - fd| / max(|g|, |fd|, 1)` per coordinate.
    pub relative_error: Vec<f64>,
}

impl GradientCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_error.iter().copied().fold(0.0, f64::max)
    }

    /// Index and value of the worst coordinate.
    pub fn worst(&self) -> (usize, f64) {
        self.relative_error
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc })
    }
}

/// Compares the analytic gradient with central differences of step `h`.
pub fn finite_diff_check<T: Target + ?Sized>(target: &T, x: &[f64], h: f64) -> GradientCheck {
    let analytic = target.gradient(x);
    let mut probe = x.to_vec();
    let numeric: Vec<f64> = (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = target.potential(&probe);
            probe[i] = x[i] - h;
            let down = target.potential(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect();
    let relative_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(g, f)| (g - f).abs() / g.abs().max(f.abs()).max(1.0))
        .collect();
    GradientCheck {
        analytic,
        numeric,
        relative_error,
    }
}
