//! Minibatch estimates over per-record losses.
//!
//! A data-driven potential is written as `U(x) = (1/N) Σ_i U_i(x)`. A
//! [`StochasticTarget`] draws `b` record indices without replacement and
//! estimates `U` and `∇U` by averaging over that batch.

use rand::Rng;

use super::Target;
use crate::error::{Error, Result};

/// Per-record loss terms `U_i`.
///
/// Terms shared by every record (typically a prior) go through the
/// `shared_*` methods so they are evaluated once per batch instead of once
/// per record. The full potential is `shared(x) + (1/N) Σ_i record_i(x)`.
pub trait RecordLosses: Send + Sync {
    fn dim(&self) -> usize;

    fn n_records(&self) -> usize;

    fn record_potential(&self, i: usize, x: &[f64]) -> f64;

    /// Adds `∇ record_i(x)` to `grad`.
    fn add_record_gradient(&self, i: usize, x: &[f64], grad: &mut [f64]);

    fn shared_potential(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn add_shared_gradient(&self, _x: &[f64], _grad: &mut [f64]) {}
}

/// Sorted record indices selected for one path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch(Vec<usize>);

impl Batch {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Batch(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Record losses with a batch size.
#[derive(Clone, Debug)]
pub struct StochasticTarget<R> {
    records: R,
    batch_size: usize,
}

impl<R: RecordLosses> StochasticTarget<R> {
    pub fn new(records: R, batch_size: usize) -> Result<Self> {
        let n = records.n_records();
        if batch_size == 0 || batch_size > n {
            return Err(Error::invalid(
                "batch size",
                format!("batch size must be in 1..={n}, got {batch_size}"),
            ));
        }
        Ok(Self { records, batch_size })
    }

    pub fn records(&self) -> &R {
        &self.records
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn n_records(&self) -> usize {
        self.records.n_records()
    }

    pub fn is_full_batch(&self) -> bool {
        self.batch_size == self.records.n_records()
    }

    pub fn full_batch(&self) -> Batch {
        Batch((0..self.records.n_records()).collect())
    }

    /// Uniform draw of `b` distinct records.
    ///
    /// A full batch consumes no randomness.
    pub fn sample_batch<G: Rng + ?Sized>(&self, rng: &mut G) -> Batch {
        if self.is_full_batch() {
            return self.full_batch();
        }
        let picked = rand::seq::index::sample(rng, self.records.n_records(), self.batch_size);
        Batch::new(picked.into_vec())
    }

    pub fn minibatch_potential(&self, x: &[f64], batch: &Batch) -> f64 {
        let data: f64 = batch.0.iter().map(|&i| self.records.record_potential(i, x)).sum();
        self.records.shared_potential(x) + data / batch.len() as f64
    }

    pub fn minibatch_gradient_into(&self, x: &[f64], batch: &Batch, grad: &mut [f64]) {
        grad.fill(0.0);
        for &i in &batch.0 {
            self.records.add_record_gradient(i, x, grad);
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        self.records.add_shared_gradient(x, grad);
    }

    /// The minibatch potential for a fixed batch, usable wherever a [`Target`] is.
    pub fn on_batch<'a>(&'a self, batch: &'a Batch) -> BatchTarget<'a, R> {
        BatchTarget { parent: self, batch }
    }
}

/// The full-data potential.
impl<R: RecordLosses> Target for StochasticTarget<R> {
    fn dim(&self) -> usize {
        self.records.dim()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.minibatch_potential(x, &self.full_batch())
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        self.minibatch_gradient_into(x, &self.full_batch(), grad)
    }
}

/// `Ũ` restricted to one batch.
#[derive(Clone, Copy, Debug)]
pub struct BatchTarget<'a, R> {
    parent: &'a StochasticTarget<R>,
    batch: &'a Batch,
}

impl<R: RecordLosses> Target for BatchTarget<'_, R> {
    fn dim(&self) -> usize {
        self.parent.records.dim()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.parent.minibatch_potential(x, self.batch)
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        self.parent.minibatch_gradient_into(x, self.batch, grad)
    }
}

/// Isotropic quadratic records `U_i(x) = ½ a_i ‖x - c_i‖²`.
#[derive(Clone, Debug)]
pub struct QuadraticRecords {
    dim: usize,
    curvature: Vec<f64>,
    /// Row-major `N × dim`.
    centers: Vec<f64>,
}

impl QuadraticRecords {
    pub fn new(dim: usize, curvature: Vec<f64>, centers: Vec<f64>) -> Result<Self> {
        if dim == 0 || curvature.is_empty() {
            return Err(Error::invalid("quadratic records", "need at least one record and dimension"));
        }
        if centers.len() != curvature.len() * dim {
            return Err(Error::invalid(
                "quadratic records",
                format!("expected {} center values, got {}", curvature.len() * dim, centers.len()),
            ));
        }
        if curvature.iter().any(|a| !a.is_finite()) || centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("quadratic records", "values must be finite"));
        }
        Ok(Self { dim, curvature, centers })
    }

    /// `n` unit-curvature records whose centers have exactly zero mean and
    /// root-mean-square `spread`, so the full potential is `½‖x‖²` plus a
    /// constant while every minibatch gradient is shifted by a random offset.
    pub fn split_standard_normal<G: Rng + ?Sized>(n: usize, dim: usize, spread: f64, rng: &mut G) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("quadratic records", "need at least two records"));
        }
        let mut centers: Vec<f64> = (0..n * dim).map(|_| crate::rng::standard_normal(rng)).collect();
        for k in 0..dim {
            let col = |c: &[f64], i: usize| c[i * dim + k];
            let mean = (0..n).map(|i| col(&centers, i)).sum::<f64>() / n as f64;
            let rms = ((0..n).map(|i| (col(&centers, i) - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            for i in 0..n {
                let c = &mut centers[i * dim + k];
                *c = (*c - mean) / rms * spread;
            }
        }
        Self::new(dim, vec![1.0; n], centers)
    }

    fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }
}

impl RecordLosses for QuadraticRecords {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_records(&self) -> usize {
        self.curvature.len()
    }

    fn record_potential(&self, i: usize, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(self.center(i)).map(|(a, c)| (a - c).powi(2)).sum();
        0.5 * self.curvature[i] * d2
    }

    fn add_record_gradient(&self, i: usize, x: &[f64], grad: &mut [f64]) {
        let a = self.curvature[i];
        for ((g, xv), c) in grad.iter_mut().zip(x).zip(self.center(i)) {
            *g += a * (xv - c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn records() -> QuadraticRecords {
        QuadraticRecords::split_standard_normal(200, 2, 3.0, &mut seeded(11)).unwrap()
    }

    #[test]
    fn full_batch_matches_closed_form() {
        let t = StochasticTarget::new(records(), 200).unwrap();
        let x = [0.7, -1.1];
        // mean of ½‖x - c_i‖² = ½‖x‖² + ½ mean ‖c_i‖² since the centers average to zero
        let expected = 0.5 * (0.49 + 1.21) + 0.5 * 2.0 * 9.0;
        assert!((t.potential(&x) - expected).abs() < 1e-10 * expected);
        let g = t.gradient(&x);
        assert!((g[0] - 0.7).abs() < 1e-10 && (g[1] + 1.1).abs() < 1e-10);
    }

    #[test]
    fn full_batch_consumes_no_randomness() {
        let t = StochasticTarget::new(records(), 200).unwrap();
        let mut rng = seeded(1);
        let before: u64 = seeded(1).random();
        assert_eq!(t.sample_batch(&mut rng), t.full_batch());
        assert_eq!(rng.random::<u64>(), before);
    }

    #[test]
    fn batches_are_distinct_sorted_and_reproducible() {
        let t = StochasticTarget::new(records(), 17).unwrap();
        let a = t.sample_batch(&mut seeded(4));
        let b = t.sample_batch(&mut seeded(4));
        assert_eq!(a, b);
        assert_eq!(a.len(), 17);
        assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_record_gradients_are_unbiased() {
        let recs = records();
        let t = StochasticTarget::new(recs, 1).unwrap();
        let x = [0.3, 0.4];
        let full = t.gradient(&x);
        let mut rng = seeded(8);
        let n = 10_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        let mut g = [0.0; 2];
        for _ in 0..n {
            let b = t.sample_batch(&mut rng);
            t.minibatch_gradient_into(&x, &b, &mut g);
            for k in 0..2 {
                sum[k] += g[k];
                sq[k] += g[k] * g[k];
            }
        }
        for k in 0..2 {
            let mean = sum[k] / n as f64;
            let se = ((sq[k] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - full[k]).abs() < 3.0 * se, "coord {k}: {mean} vs {} (se {se})", full[k]);
        }
    }

    #[test]
    fn rejects_bad_batch_sizes() {
        assert!(StochasticTarget::new(records(), 0).is_err());
        assert!(StochasticTarget::new(records(), 201).is_err());
    }
}
