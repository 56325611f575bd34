//! Closed-form potentials used by the synthetic experiments and tests.

use nalgebra::{DMatrix, DVector};

use super::{add_lp_gradient, lp_penalty, Target, DEFAULT_LP_SMOOTHING};
use crate::error::{Error, Result};

/// `U(x) = λ Σ |x_i|^p` for `0 < p ≤ 1`.
#[derive(Clone, Debug)]
pub struct LpTarget {
    p: f64,
    lambda: f64,
    dim: usize,
    smoothing: f64,
}

impl LpTarget {
    pub fn new(p: f64, lambda: f64, dim: usize, smoothing: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid("lp target", format!("p must lie in (0, 1], got {p}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid("lp target", format!("lambda must be positive, got {lambda}")));
        }
        if !(smoothing.is_finite() && smoothing >= 0.0) {
            return Err(Error::invalid("lp target", format!("smoothing must be non-negative, got {smoothing}")));
        }
        if dim == 0 {
            return Err(Error::invalid("lp target", "dimension must be positive"));
        }
        Ok(Self { p, lambda, dim, smoothing })
    }

    /// `λ|x|^p` in one dimension with the default smoothing.
    pub fn one_dim(p: f64, lambda: f64) -> Result<Self> {
        Self::new(p, lambda, 1, DEFAULT_LP_SMOOTHING)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Target for LpTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, x: &[f64]) -> f64 {
        lp_penalty(x, self.p, self.lambda)
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        add_lp_gradient(x, self.p, self.lambda, self.smoothing, grad);
    }
}

/// One-dimensional well with a flat shelf:
///
/// ```text
/// U(x) = -x - 3      x ≤ -3
///        0           -3 < x ≤ 0
///        8x(x - 1)   0 < x ≤ 1
///        x - 1       x > 1
/// ```
///
/// The quadratic piece has curvature 16, so a fixed mass must exceed
/// `16 ε² / 4` for stable leapfrog paths there.
#[derive(Clone, Copy, Debug, Default)]
pub struct PiecewiseWell;

impl Target for PiecewiseWell {
    fn dim(&self) -> usize {
        1
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if x <= -3.0 {
            -x - 3.0
        } else if x <= 0.0 {
            0.0
        } else if x <= 1.0 {
            8.0 * x * (x - 1.0)
        } else {
            x - 1.0
        }
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        let x = x[0];
        grad[0] = if x < -3.0 {
            -1.0
        } else if x < 0.0 {
            0.0
        } else if x < 1.0 {
            16.0 * x - 8.0
        } else {
            1.0
        };
    }
}

/// `1000|x|` inside `|x| ≤ x₀`, `|x| + 999 x₀` outside.
///
/// A narrow spike with gradient magnitude 1000 glued continuously onto a
/// Laplace tail.
#[derive(Clone, Copy, Debug)]
pub struct SpikySmooth {
    x0: f64,
}

impl SpikySmooth {
    pub fn new(x0: f64) -> Result<Self> {
        if !(x0.is_finite() && x0 > 0.0) {
            return Err(Error::invalid("spiky target", format!("x0 must be positive, got {x0}")));
        }
        Ok(Self { x0 })
    }

    /// The width at which the spike holds half the probability mass: `ln(1001)/1000`.
    pub fn balanced() -> Self {
        Self {
            x0: 1001f64.ln() / 1000.0,
        }
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
}

impl Target for SpikySmooth {
    fn dim(&self) -> usize {
        1
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let a = x[0].abs();
        if a > self.x0 {
            a + 999.0 * self.x0
        } else {
            1000.0 * a
        }
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        let x = x[0];
        grad[0] = if x >= self.x0 {
            1.0
        } else if x >= 0.0 {
            1000.0
        } else if x >= -self.x0 {
            -1000.0
        } else {
            -1.0
        };
    }
}

/// `U(x) = x⁴ - 4x²`, minima at `±√2` separated by a barrier of height 4.
#[derive(Clone, Copy, Debug, Default)]
pub struct DoubleWell;

impl Target for DoubleWell {
    fn dim(&self) -> usize {
        1
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let x2 = x[0] * x[0];
        x2 * x2 - 4.0 * x2
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        let x = x[0];
        grad[0] = 4.0 * x * x * x - 8.0 * x;
    }
}

/// `U(x) = -x` for `x < 0` and `3x` for `x ≥ 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct AsymmetricWell;

impl Target for AsymmetricWell {
    fn dim(&self) -> usize {
        1
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if x < 0.0 {
            -x
        } else {
            3.0 * x
        }
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        grad[0] = if x[0] < 0.0 { -1.0 } else { 3.0 };
    }
}

/// `U(x) = ½ xᵀ A x` for a symmetric, not necessarily definite, `A`.
#[derive(Clone, Debug)]
pub struct QuadraticTarget {
    a: DMatrix<f64>,
}

impl QuadraticTarget {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::invalid("quadratic target", "matrix must be square and non-empty"));
        }
        let scale = a.amax().max(f64::MIN_POSITIVE);
        if (&a - a.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("quadratic target", "matrix must be symmetric"));
        }
        Ok(Self { a })
    }

    /// `½ a x²` in one dimension.
    pub fn scalar(a: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

fn quadratic_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    0.5 * v.dot(&(m * &v))
}

fn matvec_into(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

impl Target for QuadraticTarget {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        quadratic_form(&self.a, x)
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        matvec_into(&self.a, x, grad);
    }
}

fn precision_of(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() || cov.nrows() == 0 {
        return Err(Error::invalid("covariance", "matrix must be square and non-empty"));
    }
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    if (cov - cov.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid("covariance", "matrix must be symmetric"));
    }
    let chol = nalgebra::Cholesky::new(cov.clone())
        .ok_or_else(|| Error::invalid("covariance", "matrix must be positive definite"))?;
    Ok(chol.inverse())
}

/// Zero-mean Gaussian, `U(x) = ½ xᵀ Σ⁻¹ x`.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let precision = precision_of(&covariance)?;
        Ok(Self { covariance, precision })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(variances)))
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.precision.nrows()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        quadratic_form(&self.precision, x)
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        matvec_into(&self.precision, x, grad);
    }
}

/// `U(x) = -log Σ_i p_i exp(-½ xᵀ Σ_i⁻¹ x)`.
///
/// Components are not normalised by `|Σ_i|^{-1/2}`, so with equal weights
/// and equal determinants every component carries the same mass.
#[derive(Clone, Debug)]
pub struct GaussianMixtureTarget {
    log_weights: Vec<f64>,
    components: Vec<GaussianTarget>,
}

impl GaussianMixtureTarget {
    pub fn new(weights: Vec<f64>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != covariances.len() {
            return Err(Error::invalid("gaussian mixture", "need one weight per covariance"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("gaussian mixture", "weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("gaussian mixture", format!("weights sum to {total}, expected 1")));
        }
        let components = covariances.into_iter().map(GaussianTarget::new).collect::<Result<Vec<_>>>()?;
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::invalid("gaussian mixture", "components differ in dimension"));
        }
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            components,
        })
    }

    pub fn components(&self) -> &[GaussianTarget] {
        &self.components
    }

    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        self.log_weights
            .iter()
            .zip(&self.components)
            .map(|(lw, c)| lw - c.potential(x))
            .collect()
    }

    /// Posterior component probabilities at `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let terms = self.log_terms(x);
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = terms.iter().map(|t| (t - top).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }
}

impl Target for GaussianMixtureTarget {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let terms = self.log_terms(x);
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        -(top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln())
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let mut tmp = vec![0.0; grad.len()];
        for (r, c) in self.responsibilities(x).into_iter().zip(&self.components) {
            c.gradient_into(x, &mut tmp);
            for (g, t) in grad.iter_mut().zip(&tmp) {
                *g += r * t;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::finite_diff_check;

    fn u<T: Target>(t: &T, x: f64) -> f64 {
        t.potential(&[x])
    }

    fn g<T: Target>(t: &T, x: f64) -> f64 {
        t.gradient(&[x])[0]
    }

    #[test]
    fn lp_values() {
        let l1 = LpTarget::new(1.0, 1.0, 1, 0.0).unwrap();
        assert_eq!(u(&l1, 2.0), 2.0);
        assert_eq!(g(&l1, 2.0), 1.0);
        let half = LpTarget::new(0.5, 1.0, 1, 0.0).unwrap();
        assert_eq!(u(&half, 4.0), 2.0);
        assert_eq!(g(&half, 4.0), 0.25);
        let smooth = LpTarget::new(0.5, 3.0, 1, 1e-8).unwrap();
        let at_zero = g(&smooth, 0.0);
        assert!(at_zero.is_finite());
        assert!((at_zero - 0.5 * 1e8 * 3.0).abs() < 1e-6 * at_zero);
        assert!(LpTarget::new(1.5, 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn piecewise_well_values() {
        let w = PiecewiseWell;
        assert_eq!(u(&w, -1.0), 0.0);
        assert_eq!(u(&w, 0.5), -2.0);
        assert_eq!(u(&w, 2.0), 1.0);
        assert_eq!(g(&w, 2.0), 1.0);
        // right-hand derivatives at the breakpoints
        assert_eq!(g(&w, -3.0), 0.0);
        assert_eq!(g(&w, 0.0), -8.0);
        assert_eq!(g(&w, 1.0), 1.0);
    }

    #[test]
    fn spiky_values() {
        let s = SpikySmooth::balanced();
        let x0 = s.x0();
        assert!((x0 - 0.006_908_754_779).abs() < 1e-12);
        assert!((u(&s, x0) - 1000.0 * x0).abs() < 1e-12);
        assert!((u(&s, x0 * (1.0 + 1e-12)) - 1000.0 * x0).abs() < 1e-9);
        assert_eq!(u(&s, 0.0), 0.0);
        assert_eq!(g(&s, 0.0).abs(), 1000.0);
        assert!((u(&s, 1.0) - (1.0 + 999.0 * x0)).abs() < 1e-12);
    }

    #[test]
    fn double_well_values() {
        let d = DoubleWell;
        let r2 = 2f64.sqrt();
        assert!((u(&d, r2) + 4.0).abs() < 1e-12);
        assert!(g(&d, r2).abs() < 1e-12);
        assert_eq!((u(&d, 0.0), g(&d, 0.0)), (0.0, 0.0));
        assert_eq!((u(&d, 2.0), g(&d, 2.0)), (0.0, 16.0));
    }

    #[test]
    fn asymmetric_well_values() {
        let a = AsymmetricWell;
        assert_eq!(u(&a, -2.0), 2.0);
        assert_eq!(u(&a, 1.0), 3.0);
        assert_eq!(g(&a, -1.0), -1.0);
    }

    #[test]
    fn breakpoints_are_continuous() {
        let eps = 1e-13;
        let s = SpikySmooth::balanced();
        for (f, b) in [
            (&PiecewiseWell as &dyn Target, -3.0),
            (&PiecewiseWell, 0.0),
            (&PiecewiseWell, 1.0),
            (&s, s.x0()),
            (&s, -s.x0()),
            (&AsymmetricWell, 0.0),
        ] {
            let jump = (f.potential(&[b - eps]) - f.potential(&[b + eps])).abs();
            assert!(jump <= 1e-9, "jump {jump} at {b}");
        }
    }

    #[test]
    fn quadratic_values() {
        let q = QuadraticTarget::scalar(16.0);
        assert_eq!(u(&q, 1.0), 8.0);
        assert_eq!(g(&q, 1.0), 16.0);
        let zero = QuadraticTarget::new(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(zero.potential(&[1.0, -2.0, 3.0]), 0.0);
        assert_eq!(zero.gradient(&[1.0, -2.0, 3.0]), vec![0.0; 3]);
    }

    #[test]
    fn gaussian_values() {
        let t = GaussianTarget::diagonal(&[100.0, 1.0]).unwrap();
        assert!((t.potential(&[10.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!(GaussianTarget::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    fn two_mode_mixture() -> GaussianMixtureTarget {
        GaussianMixtureTarget::new(
            vec![0.5, 0.5],
            vec![
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 100.0])),
                DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 1.0])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn mixture_gradient() {
        let m = two_mode_mixture();
        assert_eq!(m.gradient(&[0.0, 0.0]), vec![0.0, 0.0]);
        let x = [3.0, 1.0];
        let check = finite_diff_check(&m, &x, 1e-5);
        for (a, n) in check.analytic.iter().zip(&check.numeric) {
            assert!((a - n).abs() < 1e-6, "{a} vs {n}");
        }
        let r = m.responsibilities(&x);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // (3, 1) is far more plausible under Σ₂ = diag(100, 1)
        assert!(r[1] > r[0]);
    }
}
