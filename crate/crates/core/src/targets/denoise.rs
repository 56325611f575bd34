//! Robust low-rank factorisation `Y ≈ AB + S` of a gray-level image.
//!
//! ```text
//! U(A, B, S) = ½μ ‖Y - AB - S‖²_F + ½λ₁ (‖A‖²_F + ‖B‖²_F) + λ₂ Σ |S_ij|^p
//! ```
//!
//! The state is flattened as `A` (rows × r), then `B` (r × cols), then `S`
//! (rows × cols), each block row-major.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{add_lp_gradient, lp_penalty, Target, DEFAULT_LP_SMOOTHING};
use crate::error::{check_dim, Error, Result};

/// Model weights for [`DenoiseTarget`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseParams {
    pub mu: f64,
    pub lambda_low_rank: f64,
    pub lambda_sparse: f64,
    pub p: f64,
    pub smoothing: f64,
    pub rank: usize,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            mu: 100.0,
            lambda_low_rank: 1.0,
            lambda_sparse: 10.0,
            p: 0.5,
            smoothing: DEFAULT_LP_SMOOTHING,
            rank: 20,
        }
    }
}

/// The three factor blocks of a denoising state.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationState {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl FactorizationState {
    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn low_rank(&self) -> DMatrix<f64> {
        &self.a * &self.b
    }

    /// Flattens to the sampler layout (A, B, S; each row-major).
    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.a.len() + self.b.len() + self.s.len());
        for m in [&self.a, &self.b, &self.s] {
            push_row_major(m, &mut out);
        }
        out
    }

    pub fn from_vector(v: &[f64], rows: usize, cols: usize, rank: usize) -> Result<Self> {
        check_dim(layout_len(rows, cols, rank), v.len())?;
        let (a, rest) = v.split_at(rows * rank);
        let (b, s) = rest.split_at(rank * cols);
        Ok(Self {
            a: DMatrix::from_row_slice(rows, rank, a),
            b: DMatrix::from_row_slice(rank, cols, b),
            s: DMatrix::from_row_slice(rows, cols, s),
        })
    }
}

fn layout_len(rows: usize, cols: usize, rank: usize) -> usize {
    rows * rank + rank * cols + rows * cols
}

fn push_row_major(m: &DMatrix<f64>, out: &mut Vec<f64>) {
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
}

fn write_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    let cols = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..cols {
            out[i * cols + j] = m[(i, j)];
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenoiseTarget {
    observed: DMatrix<f64>,
    params: DenoiseParams,
}

impl DenoiseTarget {
    pub fn new(observed: DMatrix<f64>, params: DenoiseParams) -> Result<Self> {
        let (rows, cols) = observed.shape();
        if params.rank == 0 || params.rank > rows.min(cols) {
            return Err(Error::invalid(
                "rank",
                format!("rank must be in 1..={} for a {rows}x{cols} image, got {}", rows.min(cols), params.rank),
            ));
        }
        if !(params.p > 0.0 && params.p <= 1.0) {
            return Err(Error::invalid("denoise params", format!("p must lie in (0, 1], got {}", params.p)));
        }
        let weights = [params.mu, params.lambda_low_rank, params.lambda_sparse, params.smoothing];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("denoise params", "weights and smoothing must be non-negative"));
        }
        Ok(Self { observed, params })
    }

    pub fn params(&self) -> &DenoiseParams {
        &self.params
    }

    pub fn shape(&self) -> (usize, usize) {
        self.observed.shape()
    }

    pub fn observed(&self) -> &DMatrix<f64> {
        &self.observed
    }

    pub fn unpack(&self, x: &[f64]) -> Result<FactorizationState> {
        let (rows, cols) = self.shape();
        FactorizationState::from_vector(x, rows, cols, self.params.rank)
    }

    fn unpack_unchecked(&self, x: &[f64]) -> FactorizationState {
        self.unpack(x).expect("state length checked by the sampler")
    }
}

impl Target for DenoiseTarget {
    fn dim(&self) -> usize {
        let (rows, cols) = self.shape();
        layout_len(rows, cols, self.params.rank)
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let st = self.unpack_unchecked(x);
        let p = &self.params;
        let residual = &self.observed - st.low_rank() - &st.s;
        0.5 * p.mu * residual.norm_squared()
            + 0.5 * p.lambda_low_rank * (st.a.norm_squared() + st.b.norm_squared())
            + lp_penalty(st.s.as_slice(), p.p, p.lambda_sparse)
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        let st = self.unpack_unchecked(x);
        let p = &self.params;
        // E = AB + S - Y
        let err = st.low_rank() + &st.s - &self.observed;
        let grad_a = &err * st.b.transpose() * p.mu + &st.a * p.lambda_low_rank;
        let grad_b = st.a.transpose() * &err * p.mu + &st.b * p.lambda_low_rank;
        let (ga, rest) = grad.split_at_mut(st.a.len());
        let (gb, gs) = rest.split_at_mut(st.b.len());
        write_row_major(&grad_a, ga);
        write_row_major(&grad_b, gb);
        write_row_major(&(err * p.mu), gs);
        let s_flat = &x[x.len() - gs.len()..];
        add_lp_gradient(s_flat, p.p, p.lambda_sparse, p.smoothing, gs);
    }
}
