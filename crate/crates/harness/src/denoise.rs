//! Low-rank plus sparse image denoising.

use std::path::Path;

use nalgebra::DMatrix;
use qhmc_core::data::{corrupt_image, ImageMatrix};
use qhmc_core::diagnostics::psnr;
use qhmc_core::rng::SamplerRng;
use qhmc_core::samplers::{qhmc_sample, Chain, SamplerConfig};
use qhmc_core::targets::{DenoiseParams, DenoiseTarget, FactorizationState};

use crate::error::{HarnessError, Result};
use crate::report::SampleTable;

/// Stream index of the corruption draw under the corruption seed.
pub const CORRUPTION_STREAM: u64 = u64::MAX;

/// A 28×28 handwritten-style "8": two anti-aliased rings stacked vertically.
pub fn glyph_eight() -> ImageMatrix {
    let ring = |r: f64, c: f64, cy: f64, cx: f64, radius: f64| {
        let d = ((r - cy).powi(2) + (c - cx).powi(2)).sqrt();
        (1.0 - ((d - radius).abs() - 1.2).max(0.0) / 0.8).clamp(0.0, 1.0)
    };
    let m = DMatrix::from_fn(28, 28, |r, c| {
        let (r, c) = (r as f64, c as f64);
        ring(r, c, 9.0, 13.5, 4.5).max(ring(r, c, 18.5, 13.5, 5.5))
    });
    ImageMatrix::from_matrix(&m).expect("non-empty image")
}

/// Clean reference image and the observation handed to the sampler.
#[derive(Clone, Debug)]
pub struct DenoiseInput {
    pub clean: ImageMatrix,
    pub corrupted: ImageMatrix,
}

impl DenoiseInput {
    /// Corrupts `clean` with salt-and-pepper noise of the given density; zero density keeps it as is.
    pub fn new(clean: ImageMatrix, density: f64, corruption_seed: u64) -> Result<Self> {
        let corrupted = if density > 0.0 {
            corrupt_image(&clean, density, &mut qhmc_core::rng::stream(corruption_seed, CORRUPTION_STREAM))?
        } else {
            clean.clone()
        };
        Ok(Self { clean, corrupted })
    }

    /// Reads a PGM or CSV image, or uses [`glyph_eight`] when `path` is `None`.
    pub fn load(path: Option<&Path>, density: f64, corruption_seed: u64) -> Result<Self> {
        let clean = match path {
            Some(p) if !p.is_file() => {
                return Err(HarnessError::MissingInput {
                    path: p.to_path_buf(),
                    expected: "a PGM (P2/P5) image or a comma-separated matrix of gray levels in [0, 1]",
                })
            }
            Some(p) => ImageMatrix::load(p)?,
            None => glyph_eight(),
        };
        Self::new(clean, density, corruption_seed)
    }

    pub fn input_psnr(&self) -> Result<f64> {
        Ok(psnr(self.corrupted.pixels(), self.clean.pixels())?)
    }
}

/// Rank-`r` truncated SVD of `y` split as `A = U_r Σ_r^{1/2}`, `B = Σ_r^{1/2} V_rᵀ`, with `S = 0`.
pub fn svd_initialisation(y: &DMatrix<f64>, rank: usize) -> Result<FactorizationState> {
    let (rows, cols) = y.shape();
    if rank == 0 || rank > rows.min(cols) {
        return Err(qhmc_core::Error::Validation {
            what: "rank",
            reason: format!("rank must be in 1..={} for a {rows}x{cols} image, got {rank}", rows.min(cols)),
        }
        .into());
    }
    let svd = y.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let root: Vec<f64> = svd.singular_values.iter().map(|s| s.sqrt()).collect();
    Ok(FactorizationState {
        a: DMatrix::from_fn(rows, rank, |i, k| u[(i, k)] * root[k]),
        b: DMatrix::from_fn(rank, cols, |k, j| root[k] * v_t[(k, j)]),
        s: DMatrix::zeros(rows, cols),
    })
}

/// Reconstruction and score of one denoising run.
#[derive(Clone, Debug)]
pub struct DenoiseReport {
    /// Posterior mean of `AB`, clamped to `[0, 1]`.
    pub reconstruction: ImageMatrix,
    pub psnr: f64,
    pub samples: SampleTable,
    pub chain: Chain,
}

fn factor_names(rows: usize, cols: usize, rank: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(rows * rank + rank * cols + rows * cols);
    names.extend((0..rows).flat_map(|i| (0..rank).map(move |k| format!("a_{i}_{k}"))));
    names.extend((0..rank).flat_map(|k| (0..cols).map(move |j| format!("b_{k}_{j}"))));
    names.extend((0..rows).flat_map(|i| (0..cols).map(move |j| format!("s_{i}_{j}"))));
    names
}

/// Samples the factorisation posterior from the SVD initialisation and
/// reconstructs the image as the mean of `AB` over collected samples.
pub fn denoise(input: &DenoiseInput, model: &DenoiseParams, sampler: &SamplerConfig, rng: &mut SamplerRng) -> Result<DenoiseReport> {
    let y = input.corrupted.to_matrix();
    let init = svd_initialisation(&y, model.rank)?;
    let target = DenoiseTarget::new(y, *model)?;
    let chain = qhmc_sample(sampler, &target, &init.to_vector(), rng)?;
    let (rows, cols) = target.shape();
    let mut mean = DMatrix::<f64>::zeros(rows, cols);
    for s in chain.samples() {
        mean += target.unpack(s)?.low_rank();
    }
    mean /= chain.len() as f64;
    let reconstruction = ImageMatrix::from_matrix(&mean)?;
    let score = psnr(reconstruction.pixels(), input.clean.pixels())?;
    let samples = SampleTable::from_chain(&chain, &factor_names(rows, cols, model.rank));
    Ok(DenoiseReport {
        reconstruction,
        psnr: score,
        samples,
        chain,
    })
}
