//! Mass matrices and the laws they are drawn from.
//!
//! A [`MassMatrix`] fixes the kinetic energy `K(q) = ½ qᵀM⁻¹q` for one
//! simulation path. A [`MassSpec`] is the distribution `P_M(M)` that the
//! samplers draw a new matrix from at the start of every path:
//!
//! * `Dirac`: always the same matrix (plain HMC),
//! * `ScalarLogNormal`: `M = 10^ω I` with `ω ~ N(μ, σ²)` (S-QHMC),
//! * `DiagonalLogNormal`: independent `m_kk = 10^ω_k` (D-QHMC),
//! * `Mixture`: a weighted choice among fixed matrices (M-QHMC).
//!
//! Log-normal laws are in base 10 throughout.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{categorical, standard_normal};
use crate::state::Momentum;
use crate::targets::Target;

const SYMMETRY_TOL: f64 = 1e-12;
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Symmetric positive-definite mass with its Cholesky factor cached.
#[derive(Clone, Debug)]
pub struct DenseMass {
    matrix: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
}

impl DenseMass {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular `L` with `M = L Lᵀ`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.cholesky.l()
    }
}

impl PartialEq for DenseMass {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

/// Positive-definite mass in scalar, diagonal or dense form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MassMatrixRepr", into = "MassMatrixRepr")]
pub enum MassMatrix {
    /// `m I`, valid for any dimension.
    Scalar(f64),
    Diagonal(Vec<f64>),
    Dense(DenseMass),
}

impl MassMatrix {
    pub fn scalar(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::invalid("mass", format!("scalar mass must be positive, got {m}")));
        }
        Ok(MassMatrix::Scalar(m))
    }

    pub fn diagonal(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("mass", "diagonal mass needs at least one entry"));
        }
        if let Some(bad) = entries.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::invalid("mass", format!("diagonal entry must be positive, got {bad}")));
        }
        Ok(MassMatrix::Diagonal(entries))
    }

    /// Validates symmetry and positive-definiteness via a Cholesky factorisation.
    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid(
                "mass",
                format!("dense mass must be square, got {}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose()).amax();
        if !(asym <= SYMMETRY_TOL * scale) {
            return Err(Error::invalid("mass", format!("dense mass is not symmetric (max |M - Mᵀ| = {asym:e})")));
        }
        let cholesky = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::invalid("mass", "dense mass is not positive definite"))?;
        Ok(MassMatrix::Dense(DenseMass { matrix, cholesky }))
    }

    /// Fixed dimension of the matrix, `None` for a scalar mass.
    pub fn dim(&self) -> Option<usize> {
        match self {
            MassMatrix::Scalar(_) => None,
            MassMatrix::Diagonal(d) => Some(d.len()),
            MassMatrix::Dense(d) => Some(d.matrix.nrows()),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim() {
            Some(d) => check_dim(d, dim),
            None => Ok(()),
        }
    }

    /// `out = M v`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        match self {
            MassMatrix::Scalar(m) => out.iter_mut().zip(v).for_each(|(o, vi)| *o = m * vi),
            MassMatrix::Diagonal(d) => {
                for ((o, vi), m) in out.iter_mut().zip(v).zip(d) {
                    *o = m * vi;
                }
            }
            MassMatrix::Dense(d) => {
                let r = &d.matrix * DVector::from_column_slice(v);
                out.copy_from_slice(r.as_slice());
            }
        }
    }

    /// `out = M⁻¹ q`.
    pub fn inverse_apply_into(&self, q: &[f64], out: &mut [f64]) {
        match self {
            MassMatrix::Scalar(m) => out.iter_mut().zip(q).for_each(|(o, qi)| *o = qi / m),
            MassMatrix::Diagonal(d) => {
                for ((o, qi), m) in out.iter_mut().zip(q).zip(d) {
                    *o = qi / m;
                }
            }
            MassMatrix::Dense(d) => {
                let r = d.cholesky.solve(&DVector::from_column_slice(q));
                out.copy_from_slice(r.as_slice());
            }
        }
    }

    pub fn inverse_apply(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; q.len()];
        self.inverse_apply_into(q, &mut out);
        out
    }

    /// `qᵀM⁻¹q` without allocating for scalar and diagonal masses.
    pub fn inverse_quadratic_form(&self, q: &[f64]) -> f64 {
        match self {
            MassMatrix::Scalar(m) => q.iter().map(|v| v * v).sum::<f64>() / m,
            MassMatrix::Diagonal(d) => q.iter().zip(d).map(|(v, m)| v * v / m).sum(),
            MassMatrix::Dense(_) => {
                let w = self.inverse_apply(q);
                q.iter().zip(&w).map(|(a, b)| a * b).sum()
            }
        }
    }

    /// Kinetic energy `½ qᵀM⁻¹q`.
    pub fn kinetic_energy(&self, q: &[f64]) -> Result<f64> {
        self.check_dim(q.len())?;
        Ok(0.5 * self.inverse_quadratic_form(q))
    }

    /// `Tr(M⁻¹)` for a `dim`-dimensional system.
    pub fn trace_inverse(&self, dim: usize) -> f64 {
        match self {
            MassMatrix::Scalar(m) => dim as f64 / m,
            MassMatrix::Diagonal(d) => d.iter().map(|m| 1.0 / m).sum(),
            MassMatrix::Dense(d) => {
                // Tr(M⁻¹) = ‖L⁻¹‖_F² with M = L Lᵀ
                let l = d.cholesky.l();
                let n = l.nrows();
                let linv = l
                    .solve_lower_triangular(&DMatrix::identity(n, n))
                    .expect("Cholesky factor has a positive diagonal");
                linv.norm_squared()
            }
        }
    }

    /// Momentum `q ~ N(0, M)`.
    pub fn sample_momentum<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Momentum {
        let z: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let q = match self {
            MassMatrix::Scalar(m) => {
                let s = m.sqrt();
                z.into_iter().map(|v| s * v).collect()
            }
            MassMatrix::Diagonal(d) => z.into_iter().zip(d).map(|(v, m)| m.sqrt() * v).collect(),
            MassMatrix::Dense(d) => {
                let q = d.cholesky.l() * DVector::from_vec(z);
                q.as_slice().to_vec()
            }
        };
        Momentum(q)
    }

    /// Mean of `log10` of the diagonal (or of the eigenvalues for dense masses).
    ///
    /// This is what chain records store per path.
    pub fn log10_scale(&self) -> f64 {
        match self {
            MassMatrix::Scalar(m) => m.log10(),
            MassMatrix::Diagonal(d) => d.iter().map(|m| m.log10()).sum::<f64>() / d.len() as f64,
            MassMatrix::Dense(d) => {
                let n = d.matrix.nrows();
                let log_det: f64 = d.cholesky.l().diagonal().iter().map(|v| 2.0 * v.log10()).sum();
                log_det / n as f64
            }
        }
    }

    fn clamp_below(self, floor: f64) -> Self {
        match self {
            MassMatrix::Scalar(m) => MassMatrix::Scalar(m.max(floor)),
            MassMatrix::Diagonal(d) => MassMatrix::Diagonal(d.into_iter().map(|m| m.max(floor)).collect()),
            dense => dense,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MassMatrixRepr {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Dense(Vec<Vec<f64>>),
}

impl TryFrom<MassMatrixRepr> for MassMatrix {
    type Error = Error;

    fn try_from(repr: MassMatrixRepr) -> Result<Self> {
        match repr {
            MassMatrixRepr::Scalar(m) => MassMatrix::scalar(m),
            MassMatrixRepr::Diagonal(d) => MassMatrix::diagonal(d),
            MassMatrixRepr::Dense(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::invalid("mass", "dense mass rows must all have length equal to the row count"));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                MassMatrix::dense(DMatrix::from_row_slice(n, n, &flat))
            }
        }
    }
}

impl From<MassMatrix> for MassMatrixRepr {
    fn from(m: MassMatrix) -> Self {
        match m {
            MassMatrix::Scalar(v) => MassMatrixRepr::Scalar(v),
            MassMatrix::Diagonal(d) => MassMatrixRepr::Diagonal(d),
            MassMatrix::Dense(d) => {
                let n = d.matrix.nrows();
                MassMatrixRepr::Dense((0..n).map(|i| d.matrix.row(i).iter().copied().collect()).collect())
            }
        }
    }
}

/// Shape of `P_M(M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassLaw {
    Dirac(MassMatrix),
    ScalarLogNormal { mu: f64, sigma: f64 },
    DiagonalLogNormal { mu: Vec<f64>, sigma: Vec<f64> },
    Mixture { weights: Vec<f64>, components: Vec<MassMatrix> },
}

/// A validated mass distribution, optionally with a floor `m₀` on sampled
/// scalar and diagonal entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MassSpecRepr", into = "MassSpecRepr")]
pub struct MassSpec {
    law: MassLaw,
    lower_bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct MassSpecRepr {
    law: MassLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower_bound: Option<f64>,
}

impl TryFrom<MassSpecRepr> for MassSpec {
    type Error = Error;

    fn try_from(r: MassSpecRepr) -> Result<Self> {
        MassSpec::new(r.law, r.lower_bound)
    }
}

impl From<MassSpec> for MassSpecRepr {
    fn from(s: MassSpec) -> Self {
        MassSpecRepr {
            law: s.law,
            lower_bound: s.lower_bound,
        }
    }
}

impl MassSpec {
    pub fn new(law: MassLaw, lower_bound: Option<f64>) -> Result<Self> {
        validate_law(&law)?;
        if let Some(m0) = lower_bound {
            if !(m0.is_finite() && m0 > 0.0) {
                return Err(Error::invalid("mass spec", format!("lower bound must be positive, got {m0}")));
            }
        }
        Ok(Self { law, lower_bound })
    }

    pub fn dirac(mass: MassMatrix) -> Self {
        Self {
            law: MassLaw::Dirac(mass),
            lower_bound: None,
        }
    }

    /// Dirac law at `m I`.
    pub fn fixed_scalar(m: f64) -> Result<Self> {
        Ok(Self::dirac(MassMatrix::scalar(m)?))
    }

    pub fn scalar_log_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(MassLaw::ScalarLogNormal { mu, sigma }, None)
    }

    pub fn diagonal_log_normal(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        Self::new(MassLaw::DiagonalLogNormal { mu, sigma }, None)
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<MassMatrix>) -> Result<Self> {
        Self::new(MassLaw::Mixture { weights, components }, None)
    }

    pub fn with_lower_bound(self, m0: f64) -> Result<Self> {
        Self::new(self.law, Some(m0))
    }

    pub fn law(&self) -> &MassLaw {
        &self.law
    }

    pub fn lower_bound(&self) -> Option<f64> {
        self.lower_bound
    }

    /// Checks that every matrix this law can produce fits a `dim`-dimensional state.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match &self.law {
            MassLaw::Dirac(m) => m.check_dim(dim),
            MassLaw::ScalarLogNormal { .. } => Ok(()),
            MassLaw::DiagonalLogNormal { mu, .. } => check_dim(mu.len(), dim),
            MassLaw::Mixture { components, .. } => components.iter().try_for_each(|m| m.check_dim(dim)),
        }
    }

    /// The Dirac law at the median of this law (`10^μ` for log-normal laws).
    ///
    /// Used for fixed-mass baselines that share a configuration with a
    /// random-mass run. Mixtures have no single median matrix.
    pub fn median_dirac(&self) -> Result<Self> {
        let mass = match &self.law {
            MassLaw::Dirac(m) => m.clone(),
            MassLaw::ScalarLogNormal { mu, .. } => MassMatrix::Scalar(10f64.powf(*mu)),
            MassLaw::DiagonalLogNormal { mu, .. } => MassMatrix::Diagonal(mu.iter().map(|m| 10f64.powf(*m)).collect()),
            MassLaw::Mixture { .. } => {
                return Err(Error::invalid("mass spec", "a mixture law has no single median mass"));
            }
        };
        Ok(Self {
            law: MassLaw::Dirac(mass),
            lower_bound: self.lower_bound,
        })
    }

    /// Draws one mass matrix.
    ///
    /// Zero-variance log-normal components consume no randomness, so a
    /// `σ = 0` law replays the same stream as the matching Dirac law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MassMatrix {
        let drawn = match &self.law {
            MassLaw::Dirac(m) => m.clone(),
            MassLaw::ScalarLogNormal { mu, sigma } => MassMatrix::Scalar(10f64.powf(log_normal_exponent(*mu, *sigma, rng))),
            MassLaw::DiagonalLogNormal { mu, sigma } => MassMatrix::Diagonal(
                mu.iter()
                    .zip(sigma)
                    .map(|(m, s)| 10f64.powf(log_normal_exponent(*m, *s, rng)))
                    .collect(),
            ),
            MassLaw::Mixture { weights, components } => components[categorical(weights, rng)].clone(),
        };
        match self.lower_bound {
            Some(m0) => drawn.clamp_below(m0),
            None => drawn,
        }
    }
}

/// `H(x, q) = U(x) + ½ qᵀM⁻¹q`.
pub fn hamiltonian<T: Target + ?Sized>(target: &T, x: &[f64], q: &[f64], mass: &MassMatrix) -> Result<f64> {
    check_dim(target.dim(), x.len())?;
    check_dim(x.len(), q.len())?;
    Ok(target.potential(x) + mass.kinetic_energy(q)?)
}

fn log_normal_exponent<R: Rng + ?Sized>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        mu
    } else {
        mu + sigma * standard_normal(rng)
    }
}

fn validate_law(law: &MassLaw) -> Result<()> {
    let bad = |reason: String| Err(Error::invalid("mass spec", reason));
    match law {
        MassLaw::Dirac(_) => Ok(()),
        MassLaw::ScalarLogNormal { mu, sigma } => {
            if !mu.is_finite() || !(sigma.is_finite() && *sigma >= 0.0) {
                return bad(format!("log-normal needs finite mu and sigma >= 0, got ({mu}, {sigma})"));
            }
            Ok(())
        }
        MassLaw::DiagonalLogNormal { mu, sigma } => {
            if mu.is_empty() || mu.len() != sigma.len() {
                return bad(format!("mu and sigma lengths differ or are empty ({} vs {})", mu.len(), sigma.len()));
            }
            if mu.iter().any(|m| !m.is_finite()) || sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return bad("log-normal needs finite mu and sigma >= 0".into());
            }
            Ok(())
        }
        MassLaw::Mixture { weights, components } => {
            if weights.is_empty() || weights.len() != components.len() {
                return bad(format!(
                    "mixture needs one weight per component ({} weights, {} components)",
                    weights.len(),
                    components.len()
                ));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return bad("mixture weights must be non-negative".into());
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                return bad(format!("mixture weights sum to {total}, expected 1"));
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn mean_std(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        (m, var.sqrt())
    }

    #[test]
    fn zero_sigma_is_ten_to_the_mu() {
        let spec = MassSpec::scalar_log_normal(1.0, 0.0).unwrap();
        let mut rng = seeded(1);
        for _ in 0..10 {
            assert_eq!(spec.sample(&mut rng), MassMatrix::Scalar(10.0));
        }
    }

    #[test]
    fn single_component_mixture_and_dirac_are_exact() {
        let m0 = MassMatrix::diagonal(vec![0.3, 7.0]).unwrap();
        let mix = MassSpec::mixture(vec![1.0], vec![m0.clone()]).unwrap();
        let dirac = MassSpec::dirac(m0.clone());
        let mut rng = seeded(2);
        for _ in 0..10 {
            assert_eq!(mix.sample(&mut rng), m0);
            let d = dirac.sample(&mut rng);
            match (&d, &m0) {
                (MassMatrix::Diagonal(a), MassMatrix::Diagonal(b)) => {
                    assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
                }
                _ => panic!("shape changed"),
            }
        }
    }

    #[test]
    fn scalar_log_normal_moments() {
        let spec = MassSpec::scalar_log_normal(0.0, 1.0).unwrap();
        let mut rng = seeded(3);
        let logs: Vec<f64> = (0..100_000)
            .map(|_| match spec.sample(&mut rng) {
                MassMatrix::Scalar(m) => m.log10(),
                _ => unreachable!(),
            })
            .collect();
        let (m, s) = mean_std(&logs);
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((s - 1.0).abs() < 0.02, "std {s}");
    }

    #[test]
    fn diagonal_entries_are_independent() {
        let spec = MassSpec::diagonal_log_normal(vec![-1.0, 2.0], vec![1.0, 0.5]).unwrap();
        let mut rng = seeded(4);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..100_000 {
            let MassMatrix::Diagonal(d) = spec.sample(&mut rng) else { unreachable!() };
            a.push(d[0].log10());
            b.push(d[1].log10());
        }
        let (ma, sa) = mean_std(&a);
        let (mb, sb) = mean_std(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
        assert!((cov / (sa * sb)).abs() < 0.02);
        assert!((ma + 1.0).abs() < 0.02 && (mb - 2.0).abs() < 0.02);
    }

    #[test]
    fn lower_bound_clamps_draws() {
        let spec = MassSpec::scalar_log_normal(0.0, 2.0).unwrap().with_lower_bound(1.0).unwrap();
        let mut rng = seeded(5);
        let mut clamped = 0;
        for _ in 0..10_000 {
            let MassMatrix::Scalar(m) = spec.sample(&mut rng) else { unreachable!() };
            assert!(m >= 1.0);
            if m == 1.0 {
                clamped += 1;
            }
        }
        assert!(clamped > 4000, "half the draws should hit the floor, got {clamped}");
    }

    #[test]
    fn momentum_variance_scalar_and_diagonal() {
        let mut rng = seeded(6);
        let n = 100_000;
        let unit = MassMatrix::scalar(1.0).unwrap();
        let v: Vec<f64> = (0..n).map(|_| unit.sample_momentum(1, &mut rng)[0]).collect();
        let (_, s) = mean_std(&v);
        assert!((s * s - 1.0).abs() < 0.03);

        let diag = MassMatrix::diagonal(vec![4.0, 1.0]).unwrap();
        let draws: Vec<Momentum> = (0..n).map(|_| diag.sample_momentum(2, &mut rng)).collect();
        let c = |i: usize, j: usize| draws.iter().map(|q| q[i] * q[j]).sum::<f64>() / n as f64;
        assert!((c(0, 0) / 4.0 - 1.0).abs() < 0.03);
        assert!((c(1, 1) - 1.0).abs() < 0.03);
        assert!(c(0, 1).abs() < 0.03 * 2.0);
    }

    #[test]
    fn momentum_is_deterministic_per_seed() {
        let m = MassMatrix::diagonal(vec![2.0, 3.0, 0.5]).unwrap();
        let a = m.sample_momentum(3, &mut seeded(9));
        let b = m.sample_momentum(3, &mut seeded(9));
        assert_eq!(a, b);
    }

    #[test]
    fn kinetic_energy_cases() {
        let m = MassMatrix::diagonal(vec![4.0, 1.0]).unwrap();
        assert_eq!(m.kinetic_energy(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((m.kinetic_energy(&[2.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(m.kinetic_energy(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dense_kinetic_energy_matches_explicit_inverse() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]);
        let m = MassMatrix::dense(a.clone()).unwrap();
        let inv = a.try_inverse().unwrap();
        let mut rng = seeded(10);
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
            let qv = DVector::from_column_slice(&q);
            let oracle = 0.5 * qv.dot(&(&inv * &qv));
            let k = m.kinetic_energy(&q).unwrap();
            assert!((k - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
        }
        assert!((m.trace_inverse(3) - inv.trace()).abs() < 1e-12);
    }

    #[test]
    fn dense_rejects_bad_matrices() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(MassMatrix::dense(asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(MassMatrix::dense(indefinite).is_err());
    }

    #[test]
    fn inverse_apply_inverts_apply() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7]);
        for m in [
            MassMatrix::scalar(0.01).unwrap(),
            MassMatrix::diagonal(vec![1e-3, 50.0]).unwrap(),
            MassMatrix::dense(a).unwrap(),
        ] {
            let v = [0.7, -1.3];
            let mut mv = [0.0; 2];
            let mut back = [0.0; 2];
            m.apply_into(&v, &mut mv);
            m.inverse_apply_into(&mv, &mut back);
            for (x, y) in v.iter().zip(&back) {
                assert!((x - y).abs() <= 1e-10 * x.abs());
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(MassSpec::scalar_log_normal(0.0, -1.0).is_err());
        assert!(MassSpec::mixture(vec![0.5, 0.6], vec![MassMatrix::Scalar(1.0), MassMatrix::Scalar(2.0)]).is_err());
        assert!(MassSpec::diagonal_log_normal(vec![0.0], vec![1.0, 1.0]).is_err());
        assert!(MassSpec::fixed_scalar(1.0).unwrap().with_lower_bound(0.0).is_err());
    }

    #[test]
    fn spec_json_round_trip_validates() {
        let spec = MassSpec::mixture(
            vec![0.5, 0.5],
            vec![
                MassMatrix::diagonal(vec![0.1, 0.001]).unwrap(),
                MassMatrix::dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0])).unwrap(),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: MassSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
        let bad = r#"{"law":{"scalar_log_normal":{"mu":0.0,"sigma":-2.0}}}"#;
        assert!(serde_json::from_str::<MassSpec>(bad).is_err());
    }

    #[test]
    fn hamiltonian_adds_potential_and_kinetic() {
        let t = crate::targets::LpTarget::new(1.0, 1.0, 1, 0.0).unwrap();
        let m = MassMatrix::scalar(1.0).unwrap();
        assert_eq!(hamiltonian(&t, &[1.0], &[0.0], &m).unwrap(), 1.0);
        assert_eq!(hamiltonian(&t, &[1.0], &[1.0], &m).unwrap(), 1.5);
        assert!(hamiltonian(&t, &[1.0], &[1.0, 0.0], &m).is_err());
    }

    #[test]
    fn kinetic_energy_is_even() {
        use proptest::prelude::*;
        proptest!(|(q in proptest::collection::vec(-1e3f64..1e3, 3), d in proptest::collection::vec(1e-3f64..1e3, 3))| {
            let m = MassMatrix::diagonal(d).unwrap();
            let neg: Vec<f64> = q.iter().map(|v| -v).collect();
            prop_assert_eq!(m.kinetic_energy(&q).unwrap(), m.kinetic_energy(&neg).unwrap());
        });
    }
}
