//! Bayesian bridge regression on the diabetes table.

use std::path::Path;

use qhmc_core::data::{load_diabetes, RegressionDataset};
use qhmc_core::diagnostics::test_mse;
use qhmc_core::rng::SamplerRng;
use qhmc_core::samplers::{qhmc_sample, Chain, SamplerConfig};
use qhmc_core::targets::BridgeTarget;

use crate::config::BridgeParams;
use crate::error::{HarnessError, Result};
use crate::report::{column_histograms, ColumnHistogram, SampleTable};

const DIABETES_FORMAT: &str = "a tab-separated table with header `AGE SEX BMI BP S1 S2 S3 S4 S5 S6 Y` and 442 rows";

/// Reads and standardises the diabetes table with the given train/test split.
pub fn load_regression_data(path: &Path, split_seed: u64) -> Result<RegressionDataset> {
    if !path.is_file() {
        return Err(HarnessError::MissingInput {
            path: path.to_path_buf(),
            expected: DIABETES_FORMAT,
        });
    }
    Ok(load_diabetes(path, split_seed)?)
}

/// Test error and coefficient posterior of one bridge regression run.
#[derive(Clone, Debug)]
pub struct BridgeReport {
    /// MSE of the posterior-mean coefficients on the standardised test split.
    pub test_mse: f64,
    pub test_mse_per_sample: f64,
    pub split_seed: u64,
    pub samples: SampleTable,
    /// One histogram per attribute.
    pub histograms: Vec<ColumnHistogram>,
    pub chain: Chain,
}

/// Samples the bridge posterior from `β = 0` and scores it on the test split.
pub fn regress_dataset(data: &RegressionDataset, params: &BridgeParams, sampler: &SamplerConfig, rng: &mut SamplerRng) -> Result<BridgeReport> {
    let target = BridgeTarget::new(data.train_x(), data.train_y(), params.mu, params.lambda, params.p)?.with_smoothing(params.smoothing);
    let chain = qhmc_sample(sampler, &target, &vec![0.0; data.n_features()], rng)?;
    let mse = test_mse(chain.samples(), &data.test_x(), &data.test_y())?;
    let samples = SampleTable::from_chain(&chain, data.names());
    let histograms = column_histograms(&samples, params.histogram_bins, None, None)?;
    Ok(BridgeReport {
        test_mse: mse.posterior_mean,
        test_mse_per_sample: mse.per_sample_mean(),
        split_seed: data.split_seed(),
        samples,
        histograms,
        chain,
    })
}

/// Loads the table at `path`, splits it with `split_seed` and runs [`regress_dataset`].
pub fn bridge_regress(path: &Path, params: &BridgeParams, sampler: &SamplerConfig, split_seed: u64, seed: u64) -> Result<BridgeReport> {
    let data = load_regression_data(path, split_seed)?;
    regress_dataset(&data, params, sampler, &mut qhmc_core::rng::seeded(seed))
}
