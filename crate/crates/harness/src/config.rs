//! Experiment configuration files.
//!
//! One JSON file describes one experiment:
//!
//! ```json
//! {
//!   "experiment": { "id": "lp1d", "p": 1.0 },
//!   "runs": [ { "label": "s-qhmc", "sampler": { "mass": { "law": { "scalar_log_normal": { "mu": 0.0, "sigma": 1.0 } } }, "n_paths": 200000 } } ],
//!   "seed": 7
//! }
//! ```
//!
//! Every field except `experiment.id` has a default. An empty `runs` list
//! selects the experiment's default comparison. Values given on the command
//! line override the file, which overrides the defaults.

use std::collections::HashSet;
use std::path::PathBuf;

use qhmc_core::integrators::{PathConfig, ThermostatConstants};
use qhmc_core::samplers::{BurnInMode, SamplerConfig};
use qhmc_core::targets::DenoiseParams;
use qhmc_core::{MassMatrix, MassSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub runs: Vec<RunSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Per-column histogram CSVs next to each samples file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramSpec>,
    /// Recorded in the provenance block. Every default run already uses the
    /// published path counts, so the flag changes nothing else.
    #[serde(default)]
    pub paper_scale: bool,
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One sampler in a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub label: String,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub bins: usize,
    /// Range of the bins; the sample range of each column when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum Experiment {
    /// `U(x) = λ|x|^p` in one dimension.
    Lp1d(LpParams),
    SpikySmooth(SpikyParams),
    AsymmetricWell(AsymmetricParams),
    DoubleWell(DoubleWellParams),
    IllGaussian(IllGaussianParams),
    Gmm2d(MixtureParams),
    Bridge(BridgeParams),
    Denoise(DenoiseExperiment),
    QsgnhtGauss(QsgnhtParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpParams {
    pub p: f64,
    pub lambda: f64,
    pub start: f64,
}

impl Default for LpParams {
    fn default() -> Self {
        Self {
            p: 1.0,
            lambda: 1.0,
            start: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikyKind {
    /// Flat shelf, a curvature-16 bowl and linear walls.
    #[default]
    PiecewiseWell,
    /// `1000|x|` spike glued onto a Laplace tail.
    SpikySmooth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikyParams {
    pub target: SpikyKind,
    /// Spike half-width for [`SpikyKind::SpikySmooth`]; `ln(1001)/1000` when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    pub start: f64,
}

impl Default for SpikyParams {
    fn default() -> Self {
        Self {
            target: SpikyKind::default(),
            x0: None,
            start: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymmetricParams {
    pub start: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoubleWellParams {
    pub particles: usize,
    pub start: f64,
    pub barrier: f64,
    pub check_interval: usize,
}

impl Default for DoubleWellParams {
    fn default() -> Self {
        Self {
            particles: 200,
            start: std::f64::consts::SQRT_2,
            barrier: 0.0,
            check_interval: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IllGaussianParams {
    pub variances: Vec<f64>,
    pub start: Vec<f64>,
}

impl Default for IllGaussianParams {
    fn default() -> Self {
        Self {
            variances: vec![100.0, 1.0],
            start: vec![0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    /// Diagonal covariance of each zero-mean component.
    pub variances: Vec<Vec<f64>>,
    pub start: Vec<f64>,
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self {
            weights: vec![0.5, 0.5],
            variances: vec![vec![1.0, 100.0], vec![100.0, 1.0]],
            start: vec![0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeParams {
    /// Tab-separated diabetes table with header `AGE SEX BMI BP S1 S2 S3 S4 S5 S6 Y`.
    pub data: PathBuf,
    pub lambda: f64,
    pub mu: f64,
    pub p: f64,
    /// `ε₀` in the smoothed `|β|^p`.
    pub smoothing: f64,
    /// Train/test split seed of the first repetition; repetition `r` uses `split_seed + r`.
    /// Defaults to the experiment seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    pub histogram_bins: usize,
}

impl Default for BridgeParams {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data/diabetes.tab.txt"),
            lambda: 10.0,
            mu: 100.0,
            p: 0.5,
            smoothing: 0.1,
            split_seed: None,
            histogram_bins: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseExperiment {
    /// PGM or CSV image with gray levels in `[0, 1]`; a built-in 28×28 glyph when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    /// Salt-and-pepper density applied before denoising.
    pub density: f64,
    pub model: DenoiseParams,
    /// Seed of the corruption; defaults to the experiment seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corruption_seed: Option<u64>,
}

impl Default for DenoiseExperiment {
    fn default() -> Self {
        Self {
            image: None,
            density: 0.1,
            model: DenoiseParams {
                smoothing: 0.1,
                ..DenoiseParams::default()
            },
            corruption_seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QsgnhtParams {
    pub records: usize,
    pub batch_size: usize,
    /// RMS distance of the record centres from their mean.
    pub spread: f64,
    pub data_seed: u64,
    pub start: f64,
}

impl Default for QsgnhtParams {
    fn default() -> Self {
        Self {
            records: 1000,
            batch_size: 64,
            spread: 30.0,
            data_seed: 99,
            start: 0.0,
        }
    }
}

impl Experiment {
    pub fn id(&self) -> &'static str {
        match self {
            Experiment::Lp1d(_) => "lp1d",
            Experiment::SpikySmooth(_) => "spiky_smooth",
            Experiment::AsymmetricWell(_) => "asymmetric_well",
            Experiment::DoubleWell(_) => "double_well",
            Experiment::IllGaussian(_) => "ill_gaussian",
            Experiment::Gmm2d(_) => "gmm2d",
            Experiment::Bridge(_) => "bridge",
            Experiment::Denoise(_) => "denoise",
            Experiment::QsgnhtGauss(_) => "qsgnht_gauss",
        }
    }

    /// Default experiment with the given id.
    pub fn from_id(id: &str) -> Result<Self> {
        Ok(match id {
            "lp1d" => Experiment::Lp1d(LpParams::default()),
            "spiky_smooth" => Experiment::SpikySmooth(SpikyParams::default()),
            "asymmetric_well" => Experiment::AsymmetricWell(AsymmetricParams::default()),
            "double_well" => Experiment::DoubleWell(DoubleWellParams::default()),
            "ill_gaussian" => Experiment::IllGaussian(IllGaussianParams::default()),
            "gmm2d" => Experiment::Gmm2d(MixtureParams::default()),
            "bridge" => Experiment::Bridge(BridgeParams::default()),
            "denoise" => Experiment::Denoise(DenoiseExperiment::default()),
            "qsgnht_gauss" => Experiment::QsgnhtGauss(QsgnhtParams::default()),
            other => return Err(HarnessError::Config(format!("unknown experiment id {other:?}"))),
        })
    }

    /// The comparison run when a config lists no samplers.
    pub fn default_runs(&self) -> Vec<RunSpec> {
        let path = PathConfig::default();
        let fixed = |label: &str, m: f64, n: usize| RunSpec {
            label: label.into(),
            sampler: SamplerConfig::new(path, MassSpec::fixed_scalar(m).expect("positive mass"), n),
        };
        let scalar = |label: &str, mu: f64, sigma: f64, n: usize| RunSpec {
            label: label.into(),
            sampler: SamplerConfig::new(path, MassSpec::scalar_log_normal(mu, sigma).expect("valid law"), n),
        };
        match self {
            Experiment::Lp1d(_) => vec![
                fixed("hmc-m0.01", 0.01, 200_000),
                fixed("hmc-m1", 1.0, 200_000),
                fixed("hmc-m100", 100.0, 200_000),
                scalar("s-qhmc-mu-2", -2.0, 1.0, 200_000),
                scalar("s-qhmc-mu0", 0.0, 1.0, 200_000),
                scalar("s-qhmc-mu2", 2.0, 1.0, 200_000),
            ],
            Experiment::SpikySmooth(_) | Experiment::AsymmetricWell(_) => vec![
                fixed("hmc-m0.01", 0.01, 50_000),
                fixed("hmc-m100", 100.0, 50_000),
                scalar("s-qhmc", 0.0, 2.0, 50_000),
            ],
            Experiment::DoubleWell(_) => vec![
                scalar("sigma0", 1.0, 0.0, 2500),
                scalar("sigma1", 1.0, 1.0, 2500),
                scalar("sigma2", 1.0, 2.0, 2500),
            ],
            Experiment::IllGaussian(_) => vec![
                RunSpec {
                    label: "d-qhmc".into(),
                    sampler: SamplerConfig::new(
                        path,
                        MassSpec::diagonal_log_normal(vec![-3.0, -1.0], vec![1.0, 1.0]).expect("valid law"),
                        10_000,
                    ),
                },
                scalar("s-qhmc", -2.0, 1.0, 10_000),
            ],
            Experiment::Gmm2d(_) => {
                let m1 = MassMatrix::diagonal(vec![0.1, 0.001]).expect("positive");
                let m2 = MassMatrix::diagonal(vec![0.001, 0.1]).expect("positive");
                vec![
                    RunSpec {
                        label: "m-qhmc".into(),
                        sampler: SamplerConfig::new(path, MassSpec::mixture(vec![0.5, 0.5], vec![m1, m2]).expect("valid law"), 20_000),
                    },
                    fixed("hmc-m0.02", 0.02, 20_000),
                ]
            }
            Experiment::Bridge(_) => {
                let descent = |mut run: RunSpec| {
                    run.sampler.burn_in = 1000;
                    run.sampler.burn_in_mode = BurnInMode::GradientDescent;
                    run
                };
                vec![descent(fixed("hmc", 100.0, 2000)), descent(scalar("s-qhmc", 2.0, 1.0, 2000))]
            }
            Experiment::Denoise(_) => {
                let mut runs = Vec::new();
                for mu in [0.0, 1.0, 2.0] {
                    for mut run in [fixed(&format!("hmc-mu{mu}"), 10f64.powf(mu), 500), scalar(&format!("s-qhmc-mu{mu}"), mu, 1.0, 500)] {
                        run.sampler.burn_in = 300;
                        runs.push(run);
                    }
                }
                runs
            }
            Experiment::QsgnhtGauss(_) => {
                let mass = MassSpec::scalar_log_normal(-1.0, 0.5)
                    .and_then(|m| m.with_lower_bound(0.1))
                    .expect("valid law");
                let mut thermostat = SamplerConfig::new(path, mass.clone(), 20_000);
                thermostat.mh_enabled = false;
                thermostat.burn_in = 1000;
                thermostat.thermostat.thermal_mass = 10.0;
                let mut naive = thermostat.clone();
                naive.thermostat = ThermostatConstants {
                    thermal_mass: f64::INFINITY,
                    diffusion: 0.0,
                    temperature: 1.0,
                };
                naive.initial_xi = Some(0.0);
                vec![
                    RunSpec {
                        label: "qsgnht".into(),
                        sampler: thermostat,
                    },
                    RunSpec {
                        label: "no-thermostat".into(),
                        sampler: naive,
                    },
                ]
            }
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            runs: Vec::new(),
            seed: 0,
            repetitions: 1,
            output_dir: default_output_dir(),
            histogram: None,
            paper_scale: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    /// The configured runs, or the experiment defaults when none are listed.
    pub fn effective_runs(&self) -> Vec<RunSpec> {
        if self.runs.is_empty() {
            self.experiment.default_runs()
        } else {
            self.runs.clone()
        }
    }

    /// Checks everything that can be checked without touching the file system.
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(HarnessError::Config("repetitions must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for run in self.effective_runs() {
            if run.label.is_empty() {
                return Err(HarnessError::Config("run labels must not be empty".into()));
            }
            if !seen.insert(file_stem(&run.label)) {
                return Err(HarnessError::Config(format!("duplicate run label {:?}", run.label)));
            }
        }
        if let Some(h) = &self.histogram {
            if h.bins == 0 {
                return Err(HarnessError::Config("histogram needs at least one bin".into()));
            }
            if let (Some(lo), Some(hi)) = (h.lower, h.upper) {
                if !(hi > lo) {
                    return Err(HarnessError::Config("histogram upper bound must exceed the lower bound".into()));
                }
            }
        }
        match &self.experiment {
            Experiment::DoubleWell(p) if p.particles == 0 || p.check_interval == 0 => {
                Err(HarnessError::Config("double_well needs particles and check_interval of at least 1".into()))
            }
            Experiment::Gmm2d(p) if p.weights.len() != p.variances.len() => {
                Err(HarnessError::Config("gmm2d needs one variance vector per weight".into()))
            }
            Experiment::Bridge(p) if p.histogram_bins == 0 => Err(HarnessError::Config("histogram_bins must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

/// Run label reduced to characters that are safe in file names.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_json(r#"{"experiment": {"id": "lp1d"}}"#).unwrap();
        assert_eq!(c.experiment, Experiment::Lp1d(LpParams::default()));
        assert_eq!(c.repetitions, 1);
        assert_eq!(c.effective_runs().len(), 6);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_id_is_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": {"id": "mnist"}}"#).is_err());
        assert!(Experiment::from_id("mnist").is_err());
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": {"id": "lp1d"}, "sed": 3}"#).is_err());
    }

    #[test]
    fn every_id_round_trips() {
        for id in [
            "lp1d",
            "spiky_smooth",
            "asymmetric_well",
            "double_well",
            "ill_gaussian",
            "gmm2d",
            "bridge",
            "denoise",
            "qsgnht_gauss",
        ] {
            let mut c = ExperimentConfig::new(Experiment::from_id(id).unwrap());
            c.runs = c.effective_runs();
            let text = serde_json::to_string(&c).unwrap();
            let back = ExperimentConfig::from_json(&text).unwrap();
            assert_eq!(back, c, "{id}");
            assert_eq!(back.experiment.id(), id);
        }
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let mut c = ExperimentConfig::new(Experiment::from_id("lp1d").unwrap());
        c.runs = vec![
            RunSpec {
                label: "a b".into(),
                sampler: SamplerConfig::default(),
            },
            RunSpec {
                label: "a_b".into(),
                sampler: SamplerConfig::default(),
            },
        ];
        assert!(c.validate().is_err());
    }
}
