//! Runs a configured experiment.
//!
//! Run `k` of repetition `r` draws from random stream `r · runs + k` under the
//! experiment seed, so results do not depend on how runs are scheduled across
//! worker threads.

use nalgebra::DMatrix;
use qhmc_core::data::{ImageMatrix, RegressionDataset};
use qhmc_core::diagnostics::{escape_ratio, Distribution1d, Laplace, TabulatedDistribution};
use qhmc_core::rng::{self, SamplerRng};
use qhmc_core::samplers::{qhmc_sample, qsgnht_sample, Chain};
use qhmc_core::targets::{
    AsymmetricWell, DoubleWell, GaussianMixtureTarget, GaussianTarget, LpTarget, PiecewiseWell, QuadraticRecords, SpikySmooth,
    StochasticTarget, Target,
};
use rand::RngCore;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, RunSpec, SpikyKind};
use crate::denoise::{denoise, DenoiseInput};
use crate::error::{HarnessError, Result};
use crate::regress::{load_regression_data, regress_dataset};
use crate::report::{column_histograms, coordinate_names, finite, sample_statistics, ColumnHistogram, RunMetrics, SampleTable};

/// Result of one sampler run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub label: String,
    pub repetition: usize,
    pub stream: u64,
    pub samples: SampleTable,
    pub metrics: RunMetrics,
    pub histograms: Vec<ColumnHistogram>,
    /// Denoised image, for the denoising experiment.
    pub image: Option<ImageMatrix>,
}

/// Results of every run, in repetition-major order.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub runs: Vec<RunOutput>,
    /// Named input images (clean and corrupted) of the denoising experiment.
    pub inputs: Vec<(String, ImageMatrix)>,
}

impl ExperimentOutput {
    pub fn run(&self, label: &str, repetition: usize) -> Option<&RunOutput> {
        self.runs.iter().find(|r| r.label == label && r.repetition == repetition)
    }

    /// Runs with the given label across repetitions.
    pub fn runs_labelled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RunOutput> + 'a {
        self.runs.iter().filter(move |r| r.label == label)
    }
}

type Reference = Box<dyn Distribution1d + Send + Sync>;

/// Exact or tabulated stationary distribution of a one-dimensional experiment.
pub fn reference_distribution(experiment: &Experiment) -> Result<Option<Reference>> {
    Ok(match experiment {
        Experiment::Lp1d(p) if p.p == 1.0 => Some(Box::new(Laplace {
            loc: 0.0,
            scale: 1.0 / p.lambda,
        })),
        Experiment::Lp1d(p) => {
            let (power, lambda) = (p.p, p.lambda);
            // density below e^-80 of its peak is dropped
            let upper = (80.0 / lambda).powf(1.0 / power).min(1e12);
            Some(Box::new(TabulatedDistribution::symmetric_log_grid(
                |x| lambda * x.abs().powf(power),
                1e-16,
                upper,
                200_000,
            )?))
        }
        Experiment::SpikySmooth(s) => match s.target {
            SpikyKind::PiecewiseWell => Some(Box::new(tabulate(&PiecewiseWell, -60.0, 60.0, 0.001)?)),
            SpikyKind::SpikySmooth => {
                let t = spiky_target(s.x0)?;
                Some(Box::new(TabulatedDistribution::symmetric_log_grid(
                    |x| t.potential(&[x]),
                    1e-12,
                    80.0,
                    200_000,
                )?))
            }
        },
        Experiment::AsymmetricWell(_) => Some(Box::new(tabulate(&AsymmetricWell, -60.0, 30.0, 0.001)?)),
        _ => None,
    })
}

fn tabulate<T: Target>(target: &T, lower: f64, upper: f64, step: f64) -> Result<TabulatedDistribution> {
    let n = ((upper - lower) / step).round() as usize;
    let grid = (0..=n).map(|i| lower + step * i as f64).collect();
    Ok(TabulatedDistribution::from_potential(|x| target.potential(&[x]), grid)?)
}

fn spiky_target(x0: Option<f64>) -> Result<SpikySmooth> {
    Ok(match x0 {
        Some(x0) => SpikySmooth::new(x0)?,
        None => SpikySmooth::balanced(),
    })
}

/// Targets, data and reference distributions shared by every run.
enum Prepared {
    Single {
        target: Box<dyn Target>,
        start: Vec<f64>,
        reference: Option<Reference>,
    },
    DoubleWell,
    Mixture {
        target: GaussianMixtureTarget,
        start: Vec<f64>,
    },
    Bridge {
        /// One split per repetition.
        splits: Vec<RegressionDataset>,
    },
    Denoise {
        input: DenoiseInput,
        input_psnr: f64,
    },
    Thermostat {
        target: StochasticTarget<QuadraticRecords>,
        start: Vec<f64>,
    },
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let reference = reference_distribution(&config.experiment)?;
    Ok(match &config.experiment {
        Experiment::Lp1d(p) => Prepared::Single {
            target: Box::new(LpTarget::one_dim(p.p, p.lambda)?),
            start: vec![p.start],
            reference,
        },
        Experiment::SpikySmooth(s) => Prepared::Single {
            target: match s.target {
                SpikyKind::PiecewiseWell => Box::new(PiecewiseWell),
                SpikyKind::SpikySmooth => Box::new(spiky_target(s.x0)?),
            },
            start: vec![s.start],
            reference,
        },
        Experiment::AsymmetricWell(a) => Prepared::Single {
            target: Box::new(AsymmetricWell),
            start: vec![a.start],
            reference,
        },
        Experiment::DoubleWell(_) => Prepared::DoubleWell,
        Experiment::IllGaussian(g) => Prepared::Single {
            target: Box::new(GaussianTarget::diagonal(&g.variances)?),
            start: g.start.clone(),
            reference: None,
        },
        Experiment::Gmm2d(m) => {
            let covariances = m
                .variances
                .iter()
                .map(|v| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v)))
                .collect();
            Prepared::Mixture {
                target: GaussianMixtureTarget::new(m.weights.clone(), covariances)?,
                start: m.start.clone(),
            }
        }
        Experiment::Bridge(b) => {
            let first = b.split_seed.unwrap_or(config.seed);
            let splits = (0..config.repetitions)
                .map(|r| load_regression_data(&b.data, first + r as u64))
                .collect::<Result<Vec<_>>>()?;
            Prepared::Bridge { splits }
        }
        Experiment::Denoise(d) => {
            let input = DenoiseInput::load(d.image.as_deref(), d.density, d.corruption_seed.unwrap_or(config.seed))?;
            let input_psnr = input.input_psnr()?;
            Prepared::Denoise { input, input_psnr }
        }
        Experiment::QsgnhtGauss(q) => {
            let records = QuadraticRecords::split_standard_normal(q.records, 1, q.spread, &mut rng::seeded(q.data_seed))?;
            Prepared::Thermostat {
                target: StochasticTarget::new(records, q.batch_size)?,
                start: vec![q.start],
            }
        }
    })
}

fn chain_output(chain: &Chain, names: &[String], reference: Option<&dyn Distribution1d>) -> Result<(SampleTable, RunMetrics)> {
    let samples = SampleTable::from_chain(chain, names);
    let mut metrics = RunMetrics::from_chain(chain);
    metrics.set_statistics(&sample_statistics(&samples, reference)?);
    Ok((samples, metrics))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

struct Partial {
    samples: SampleTable,
    metrics: RunMetrics,
    histograms: Vec<ColumnHistogram>,
    image: Option<ImageMatrix>,
}

impl Partial {
    fn plain(samples: SampleTable, metrics: RunMetrics) -> Self {
        Self {
            samples,
            metrics,
            histograms: Vec::new(),
            image: None,
        }
    }
}

fn run_one(config: &ExperimentConfig, prepared: &Prepared, run: &RunSpec, repetition: usize, rng: &mut SamplerRng) -> Result<Partial> {
    let sampler = &run.sampler;
    match prepared {
        Prepared::Single { target, start, reference } => {
            let chain = qhmc_sample(sampler, target.as_ref(), start, rng)?;
            let (samples, metrics) = chain_output(&chain, &coordinate_names(start.len()), reference.as_deref().map(|r| r as _))?;
            Ok(Partial::plain(samples, metrics))
        }
        Prepared::DoubleWell => {
            let Experiment::DoubleWell(p) = &config.experiment else { unreachable!() };
            // particles get their own streams under a key drawn from the run stream
            let key = rng.next_u64();
            let chains = (0..p.particles)
                .into_par_iter()
                .map(|i| qhmc_sample(sampler, &DoubleWell, &[p.start], &mut rng::stream(key, i as u64)))
                .collect::<qhmc_core::Result<Vec<_>>>()?;
            let trajectories: Vec<Vec<f64>> = chains.iter().map(|c| c.coordinate(0)).collect();
            let samples = particle_table(&chains);
            let mut metrics = RunMetrics {
                n_samples: samples.n_rows(),
                acceptance_rate: finite(mean(&chains.iter().map(Chain::acceptance_rate).collect::<Vec<_>>())),
                divergent_paths: chains.iter().map(Chain::divergent_count).sum(),
                ..RunMetrics::default()
            };
            metrics.set_statistics(&sample_statistics(&samples, None)?);
            metrics.escape = Some(escape_ratio(&trajectories, p.start, p.barrier, p.check_interval)?);
            Ok(Partial::plain(samples, metrics))
        }
        Prepared::Mixture { target, start } => {
            let chain = qhmc_sample(sampler, target, start, rng)?;
            let (samples, mut metrics) = chain_output(&chain, &coordinate_names(start.len()), None)?;
            metrics.mode_fractions = Some(mode_fractions(target, &chain));
            Ok(Partial::plain(samples, metrics))
        }
        Prepared::Bridge { splits } => {
            let Experiment::Bridge(params) = &config.experiment else { unreachable!() };
            let report = regress_dataset(&splits[repetition], params, sampler, rng)?;
            let mut metrics = RunMetrics::from_chain(&report.chain);
            metrics.set_statistics(&sample_statistics(&report.samples, None)?);
            metrics.test_mse = finite(report.test_mse);
            metrics.test_mse_per_sample = finite(report.test_mse_per_sample);
            metrics.split_seed = Some(report.split_seed);
            Ok(Partial {
                samples: report.samples,
                metrics,
                histograms: report.histograms,
                image: None,
            })
        }
        Prepared::Denoise { input, input_psnr } => {
            let Experiment::Denoise(params) = &config.experiment else { unreachable!() };
            let report = denoise(input, &params.model, sampler, rng)?;
            let mut metrics = RunMetrics::from_chain(&report.chain);
            metrics.psnr = finite(report.psnr);
            metrics.input_psnr = finite(*input_psnr);
            Ok(Partial {
                samples: report.samples,
                metrics,
                histograms: Vec::new(),
                image: Some(report.reconstruction),
            })
        }
        Prepared::Thermostat { target, start } => {
            let chain = qsgnht_sample(sampler, target, start, rng)?;
            let (samples, mut metrics) = chain_output(&chain, &coordinate_names(start.len()), None)?;
            metrics.xi_mean = finite(mean(&chain.xi_trace()));
            Ok(Partial::plain(samples, metrics))
        }
    }
}

/// `particle, path, x` rows, particle-major.
fn particle_table(chains: &[Chain]) -> SampleTable {
    let mut values = Vec::new();
    for (p, chain) in chains.iter().enumerate() {
        for (i, s) in chain.samples().enumerate() {
            values.extend([p as f64, (chain.burn_in() + i) as f64, s[0]]);
        }
    }
    SampleTable {
        columns: vec!["particle".into(), "path".into(), "x".into()],
        index_columns: 2,
        values,
    }
}

/// Share of samples whose most responsible component is each component.
fn mode_fractions(target: &GaussianMixtureTarget, chain: &Chain) -> Vec<f64> {
    let k = target.components().len();
    let mut counts = vec![0usize; k];
    for s in chain.samples() {
        let r = target.responsibilities(s);
        let best = (0..k).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap_or(0);
        counts[best] += 1;
    }
    counts.iter().map(|&c| c as f64 / chain.len() as f64).collect()
}

/// Executes every run of every repetition.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let runs = config.effective_runs();
    let prepared = prepare(config)?;
    let jobs: Vec<(usize, usize)> = (0..config.repetitions).flat_map(|r| (0..runs.len()).map(move |k| (r, k))).collect();
    let outputs = jobs
        .par_iter()
        .map(|&(repetition, k)| {
            let stream = (repetition * runs.len() + k) as u64;
            let run = &runs[k];
            let part = run_one(config, &prepared, run, repetition, &mut rng::stream(config.seed, stream))?;
            let histograms = match (&config.histogram, part.histograms.is_empty()) {
                (Some(h), true) => column_histograms(&part.samples, h.bins, h.lower, h.upper)?,
                _ => part.histograms,
            };
            Ok(RunOutput {
                label: run.label.clone(),
                repetition,
                stream,
                samples: part.samples,
                metrics: part.metrics,
                histograms,
                image: part.image,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let inputs = match prepared {
        Prepared::Denoise { input, .. } => vec![("clean".to_string(), input.clean), ("corrupted".to_string(), input.corrupted)],
        _ => Vec::new(),
    };
    Ok(ExperimentOutput {
        config: config.clone(),
        runs: outputs,
        inputs,
    })
}

/// Caps the global worker pool at `QHMC_KIT_THREADS` when that variable is set.
///
/// Has no effect once the pool has been built.
pub fn init_thread_pool() -> Result<()> {
    let Ok(value) = std::env::var("QHMC_KIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HarnessError::Config(format!("QHMC_KIT_THREADS must be a positive integer, got {value:?}")))?;
    // a second call finds the pool already built, which is fine
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}
