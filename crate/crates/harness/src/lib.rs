//! Experiment runner for `qhmc-core`.
//!
//! An [`ExperimentConfig`] names one of the built-in experiments (sparse
//! priors, spiky and multimodal toys, an ill-conditioned Gaussian, bridge
//! regression, image denoising, the minibatch thermostat check) and the
//! samplers to compare on it. [`run_experiment`] executes every run and
//! [`emit_artifacts`] writes samples CSVs and a metrics JSON with a
//! provenance block.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod denoise;
pub mod error;
pub mod experiments;
pub mod regress;
pub mod report;

pub use artifacts::{emit_artifacts, read_metrics, read_samples_csv};
pub use config::{Experiment, ExperimentConfig, RunSpec};
pub use error::{HarnessError, Result};
pub use experiments::{reference_distribution, run_experiment, ExperimentOutput, RunOutput};
pub use regress::bridge_regress;
pub use report::{MetricsReport, RunMetrics, SampleTable};
