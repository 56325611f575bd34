//! Sample-quality measures.
//!
//! One-dimensional Wasserstein-1 distances against samples or reference
//! distributions, escape curves for multimodal runs, error bars over repeated
//! experiments, and the application metrics (PSNR, test MSE, compression rate).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Number of quantile midpoints used when sample counts differ or a
/// reference distribution is given.
pub const QUANTILE_GRID: usize = 10_000;

/// A one-dimensional reference distribution.
pub trait Distribution1d {
    fn cdf(&self, x: f64) -> f64;

    /// Inverse CDF for `u` in `(0, 1)`.
    fn quantile(&self, u: f64) -> f64;
}

/// Laplace distribution with density `exp(-|x - loc|/scale) / (2 scale)`.
#[derive(Clone, Copy, Debug)]
pub struct Laplace {
    pub loc: f64,
    pub scale: f64,
}

impl Laplace {
    pub fn standard() -> Self {
        Self { loc: 0.0, scale: 1.0 }
    }
}

impl Distribution1d for Laplace {
    fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.scale;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        if u < 0.5 {
            self.loc + self.scale * (2.0 * u).ln()
        } else {
            self.loc - self.scale * (2.0 * (1.0 - u)).ln()
        }
    }
}

/// A distribution tabulated from its unnormalised density on a grid.
///
/// The CDF is the trapezoid-rule integral of the density, linear between
/// grid points; mass outside the grid is ignored.
#[derive(Clone, Debug)]
pub struct TabulatedDistribution {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedDistribution {
    /// Tabulates `exp(-U(x))` on an increasing `grid`.
    pub fn from_potential<F: Fn(f64) -> f64>(potential: F, grid: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid", "need at least two strictly increasing points"));
        }
        let energies: Vec<f64> = grid.iter().map(|&x| potential(x)).collect();
        let floor = energies.iter().copied().fold(f64::INFINITY, f64::min);
        if !floor.is_finite() {
            return Err(Error::invalid("potential", "not finite anywhere on the grid"));
        }
        let density: Vec<f64> = energies.iter().map(|e| (floor - e).exp()).collect();
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        for i in 1..grid.len() {
            let area = 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
            cdf.push(cdf[i - 1] + area);
        }
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self { grid, cdf })
    }

    /// Symmetric density `exp(-U(|x|))` tabulated on a log-spaced grid over
    /// `[-upper, -lower] ∪ {0} ∪ [lower, upper]`, for potentials whose mass
    /// spans many orders of magnitude.
    pub fn symmetric_log_grid<F: Fn(f64) -> f64>(potential: F, lower: f64, upper: f64, points_per_side: usize) -> Result<Self> {
        if !(lower > 0.0 && upper > lower) || points_per_side < 2 {
            return Err(Error::invalid("grid", "need 0 < lower < upper and at least two points"));
        }
        let (a, b) = (lower.ln(), upper.ln());
        let step = (b - a) / (points_per_side - 1) as f64;
        let positive: Vec<f64> = (0..points_per_side).map(|i| (a + step * i as f64).exp()).collect();
        let grid: Vec<f64> = positive
            .iter()
            .rev()
            .map(|x| -x)
            .chain(std::iter::once(0.0))
            .chain(positive.iter().copied())
            .collect();
        Self::from_potential(potential, grid)
    }
}

impl Distribution1d for TabulatedDistribution {
    fn cdf(&self, x: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g <= x);
        if i == 0 {
            return 0.0;
        }
        if i == self.grid.len() {
            return 1.0;
        }
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }

    fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u);
        if i == 0 {
            return self.grid[0];
        }
        if i == self.cdf.len() {
            return *self.grid.last().unwrap();
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        if c1 == c0 {
            x0
        } else {
            x0 + (x1 - x0) * (u - c0) / (c1 - c0)
        }
    }
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "empty sample list"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("samples", "NaN in sample list"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn grid_point(k: usize) -> f64 {
    (k as f64 + 0.5) / QUANTILE_GRID as f64
}

/// Empirical quantile: the order statistic `⌊u n⌋`.
fn empirical_quantile(sorted: &[f64], u: f64) -> f64 {
    let i = ((u * sorted.len() as f64) as usize).min(sorted.len() - 1);
    sorted[i]
}

/// W1 between two sample lists.
///
/// Equal counts pair sorted order statistics exactly; otherwise the quantile
/// functions are compared on [`QUANTILE_GRID`] midpoints.
pub fn wasserstein1_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    let (sa, sb) = (sorted(a)?, sorted(b)?);
    if sa.len() == sb.len() {
        let total: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
        return Ok(total / sa.len() as f64);
    }
    Ok(wasserstein1_quantile_grid(&sa, &sb))
}

/// W1 between sorted samples on the quantile grid, whatever the counts.
pub fn wasserstein1_quantile_grid(sorted_a: &[f64], sorted_b: &[f64]) -> f64 {
    let total: f64 = (0..QUANTILE_GRID)
        .map(|k| {
            let u = grid_point(k);
            (empirical_quantile(sorted_a, u) - empirical_quantile(sorted_b, u)).abs()
        })
        .sum();
    total / QUANTILE_GRID as f64
}

/// W1 between samples and a reference distribution via its quantile function.
pub fn wasserstein1_to<D: Distribution1d + ?Sized>(samples: &[f64], reference: &D) -> Result<f64> {
    let s = sorted(samples)?;
    let total: f64 = (0..QUANTILE_GRID)
        .map(|k| {
            let u = grid_point(k);
            (empirical_quantile(&s, u) - reference.quantile(u)).abs()
        })
        .sum();
    Ok(total / QUANTILE_GRID as f64)
}

/// Binned density estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSummary {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `counts / (n_inside · width)`; integrates to 1 over the binned range.
    pub density: Vec<f64>,
    /// Samples that fell outside `[edges[0], edges[last]]`.
    pub outside: usize,
}

impl HistogramSummary {
    pub fn new(samples: &[f64], lower: f64, upper: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(upper > lower) {
            return Err(Error::invalid("histogram", "need at least one bin and lower < upper"));
        }
        let width = (upper - lower) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lower + width * i as f64).collect();
        let mut counts = vec![0usize; bins];
        let mut outside = 0;
        for &s in samples {
            if !(s >= lower && s <= upper) {
                outside += 1;
                continue;
            }
            let i = (((s - lower) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let inside = samples.len() - outside;
        let density = counts
            .iter()
            .map(|&c| if inside == 0 { 0.0 } else { c as f64 / (inside as f64 * width) })
            .collect();
        Ok(Self {
            edges,
            counts,
            density,
            outside,
        })
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

/// Fraction of trajectories that have crossed a barrier, sampled at checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeCurve {
    /// Iteration counts `check_interval, 2·check_interval, …`.
    pub iterations: Vec<usize>,
    pub fractions: Vec<f64>,
}

impl EscapeCurve {
    pub fn final_fraction(&self) -> f64 {
        self.fractions.last().copied().unwrap_or(0.0)
    }
}

/// Escape curve for 1-D trajectories that all start on the same side of `barrier`.
///
/// `trajectories[c][t]` is the position of chain `c` after iteration `t + 1`.
/// A chain has escaped at checkpoint `k` if any position up to iteration `k`
/// lies on the other side of the barrier (or on it) from `start`.
pub fn escape_ratio(trajectories: &[Vec<f64>], start: f64, barrier: f64, check_interval: usize) -> Result<EscapeCurve> {
    if trajectories.is_empty() {
        return Err(Error::invalid("trajectories", "need at least one chain"));
    }
    if check_interval == 0 {
        return Err(Error::invalid("check interval", "must be positive"));
    }
    if start == barrier {
        return Err(Error::invalid("start", "must not lie on the barrier"));
    }
    let len = trajectories[0].len();
    if trajectories.iter().any(|t| t.len() != len) {
        return Err(Error::invalid("trajectories", "all chains must have the same length"));
    }
    let right = start > barrier;
    let first_escape: Vec<Option<usize>> = trajectories
        .iter()
        .map(|t| t.iter().position(|&x| if right { x <= barrier } else { x >= barrier }))
        .collect();
    let iterations: Vec<usize> = (1..=len / check_interval).map(|k| k * check_interval).collect();
    let fractions = iterations
        .iter()
        .map(|&it| {
            let escaped = first_escape.iter().filter(|e| matches!(e, Some(i) if *i < it)).count();
            escaped as f64 / trajectories.len() as f64
        })
        .collect();
    Ok(EscapeCurve { iterations, fractions })
}

/// Mean and spread of one statistic across repeated runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    /// Sample standard deviation across runs (zero for a single run).
    pub std: f64,
    pub runs: usize,
}

/// Per-statistic error bars; `runs[r][s]` is statistic `s` of run `r`.
pub fn moment_report(runs: &[Vec<f64>]) -> Result<Vec<MomentSummary>> {
    if runs.is_empty() {
        return Err(Error::invalid("runs", "need at least one run"));
    }
    let stats = runs[0].len();
    if runs.iter().any(|r| r.len() != stats) {
        return Err(Error::invalid("runs", "every run must report the same statistics"));
    }
    let n = runs.len() as f64;
    Ok((0..stats)
        .map(|s| {
            let mean = runs.iter().map(|r| r[s]).sum::<f64>() / n;
            let std = if runs.len() > 1 {
                (runs.iter().map(|r| (r[s] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            MomentSummary {
                mean,
                std,
                runs: runs.len(),
            }
        })
        .collect())
}

/// MSE below which [`psnr`] reports [`PSNR_CAP_DB`].
pub const PSNR_MSE_FLOOR: f64 = 1e-10;
pub const PSNR_CAP_DB: f64 = 100.0;

/// Peak signal-to-noise ratio for images scaled to `[0, 1]`: `10 log10(1 / MSE)`.
pub fn psnr(reconstruction: &[f64], reference: &[f64]) -> Result<f64> {
    check_dim(reference.len(), reconstruction.len())?;
    if reference.is_empty() {
        return Err(Error::invalid("image", "empty image"));
    }
    let mse = reconstruction
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / reference.len() as f64;
    if mse < PSNR_MSE_FLOOR {
        Ok(PSNR_CAP_DB)
    } else {
        Ok(-10.0 * mse.log10())
    }
}

/// Test error of a coefficient chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestMse {
    /// MSE of the prediction made with the posterior-mean coefficients.
    pub posterior_mean: f64,
    /// MSE of each sample's own prediction, in chain order.
    pub per_sample: Vec<f64>,
}

impl TestMse {
    pub fn per_sample_mean(&self) -> f64 {
        self.per_sample.iter().sum::<f64>() / self.per_sample.len() as f64
    }
}

fn prediction_mse(x: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64]) -> f64 {
    (y - x * DVector::from_column_slice(beta)).norm_squared() / y.len() as f64
}

/// Test MSE for coefficient samples (rows of `samples`) on `(x_test, y_test)`.
pub fn test_mse<'a, I>(samples: I, x_test: &DMatrix<f64>, y_test: &[f64]) -> Result<TestMse>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    check_dim(x_test.nrows(), y_test.len())?;
    let y = DVector::from_column_slice(y_test);
    let k = x_test.ncols();
    let mut mean = vec![0.0; k];
    let mut per_sample = Vec::new();
    for beta in samples {
        check_dim(k, beta.len())?;
        per_sample.push(prediction_mse(x_test, &y, beta));
        mean.iter_mut().zip(beta).for_each(|(m, b)| *m += b);
    }
    if per_sample.is_empty() {
        return Err(Error::invalid("samples", "no coefficient samples"));
    }
    let n = per_sample.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(TestMse {
        posterior_mean: prediction_mse(x_test, &y, &mean),
        per_sample,
    })
}

/// Total weight count over the count with `|w| ≥ threshold`; infinite if none survive.
pub fn compression_rate(weights: &[f64], threshold: f64) -> f64 {
    let kept = weights.iter().filter(|w| w.abs() >= threshold).count();
    if kept == 0 {
        f64::INFINITY
    } else {
        weights.len() as f64 / kept as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal, uniform};

    #[test]
    fn w1_point_masses() {
        assert_eq!(wasserstein1_samples(&[0.0], &[1.0]).unwrap(), 1.0);
        let v = [3.0, -1.0, 2.5];
        assert_eq!(wasserstein1_samples(&v, &v).unwrap(), 0.0);
        assert!(wasserstein1_samples(&[], &[1.0]).is_err());
    }

    #[test]
    fn w1_laplace_draws() {
        let lap = Laplace::standard();
        let mut rng = seeded(3);
        let draws: Vec<f64> = (0..100_000).map(|_| lap.quantile(uniform(&mut rng).max(1e-300))).collect();
        assert!(wasserstein1_to(&draws, &lap).unwrap() <= 0.02);
    }

    #[test]
    fn w1_paths_agree() {
        let mut rng = seeded(4);
        let a: Vec<f64> = (0..1000).map(|_| standard_normal(&mut rng)).collect();
        let b: Vec<f64> = (0..1000).map(|_| 2.0 * standard_normal(&mut rng) + 0.3).collect();
        let direct = wasserstein1_samples(&a, &b).unwrap();
        let grid = wasserstein1_quantile_grid(&sorted(&a).unwrap(), &sorted(&b).unwrap());
        assert!((direct - grid).abs() < 1e-3);
    }

    #[test]
    fn laplace_quantile_inverts_cdf() {
        let l = Laplace { loc: 0.5, scale: 2.0 };
        for u in [0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((l.cdf(l.quantile(u)) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_gaussian_matches_closed_form() {
        let grid: Vec<f64> = (0..=20_000).map(|i| -10.0 + i as f64 * 1e-3).collect();
        let t = TabulatedDistribution::from_potential(|x| 0.5 * x * x, grid).unwrap();
        // Φ(1) = 0.841344746...
        assert!((t.cdf(1.0) - 0.841_344_746).abs() < 1e-6);
        assert!((t.quantile(0.841_344_746) - 1.0).abs() < 1e-5);
        assert!(t.quantile(0.5).abs() < 1e-9);
    }

    #[test]
    fn histogram_normalises() {
        let mut rng = seeded(5);
        let s: Vec<f64> = (0..5000).map(|_| standard_normal(&mut rng)).collect();
        let h = HistogramSummary::new(&s, -2.0, 2.0, 37).unwrap();
        assert!((h.integral() - 1.0).abs() < 1e-9);
        assert_eq!(h.counts.iter().sum::<usize>() + h.outside, 5000);
    }

    #[test]
    fn escape_curve_definition() {
        let still = vec![vec![1.0; 100]; 3];
        let c = escape_ratio(&still, 1.0, 0.0, 10).unwrap();
        assert!(c.fractions.iter().all(|&f| f == 0.0));
        let mut early = vec![1.0; 100];
        early[0] = -0.5;
        let c = escape_ratio(&[early, vec![1.0; 100]], 1.0, 0.0, 10).unwrap();
        assert_eq!(c.iterations[0], 10);
        assert!(c.fractions.iter().all(|&f| f == 0.5));
    }

    #[test]
    fn moment_report_cases() {
        let same = vec![vec![1.0, 2.0]; 20];
        let r = moment_report(&same).unwrap();
        assert_eq!(r[0].std, 0.0);
        assert_eq!(r[1].mean, 2.0);
    }

    #[test]
    fn psnr_cases() {
        let a = vec![0.2; 16];
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        assert!((psnr(&b, &a).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&a[..3], &a).is_err());
    }

    #[test]
    fn compression_cases() {
        let mut w = vec![0.0; 1000];
        w.iter_mut().take(100).for_each(|v| *v = 0.5);
        assert_eq!(compression_rate(&w, 0.01), 10.0);
        assert_eq!(compression_rate(&[0.3, -0.2], 0.0), 1.0);
        assert!(compression_rate(&[0.001], 0.01).is_infinite());
    }

    #[test]
    fn test_mse_simple_cases() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let beta = [2.0, -1.0];
        let y: Vec<f64> = (0..3).map(|i| x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
        let r = test_mse([&beta[..], &beta[..]], &x, &y).unwrap();
        assert!(r.posterior_mean < 1e-30);
        let zero = [0.0, 0.0];
        let r = test_mse([&zero[..]], &x, &y).unwrap();
        let expected = y.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((r.posterior_mean - expected).abs() < 1e-12);
    }
}
