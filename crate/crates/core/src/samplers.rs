//! Metropolis-corrected samplers.
//!
//! * [`qhmc_sample`]: HMC with a mass matrix redrawn from a [`MassSpec`] at
//!   the start of every path. A Dirac law gives standard HMC.
//! * [`qsgnht_sample`]: the minibatch version with a Nosé–Hoover thermostat
//!   and an MH test on the minibatch Hamiltonian.
//! * [`baseline_sample`]: SGNHT, SGHMC and SGLD comparison samplers.
//!
//! Random draws within a path always happen in the same order: minibatch
//! (stochastic samplers only), mass, momentum, path length, path noise, MH
//! uniform. Draws that cannot affect the result (zero-variance mass laws,
//! fixed lengths, zero diffusion, disabled MH) are skipped.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::integrators::{is_divergent, leapfrog_path, thermostat_path, PathConfig, ThermostatConstants};
use crate::mass::{MassMatrix, MassSpec};
use crate::rng::{standard_normal, uniform};
use crate::state::{Momentum, StateVector};
use crate::targets::{RecordLosses, StochasticTarget, Target};

/// How burn-in paths are run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnInMode {
    /// Ordinary sampling paths whose states are discarded.
    #[default]
    Sampling,
    /// Paths started from zero momentum with MH disabled: a damped descent
    /// towards a mode.
    GradientDescent,
}

/// Everything a sampler run needs besides the target and the start point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub path: PathConfig,
    pub mass: MassSpec,
    pub mh_enabled: bool,
    /// Divides the Hamiltonian difference in the MH test.
    pub temperature: f64,
    /// Leading paths excluded from the returned samples. Counted in `n_paths`.
    pub burn_in: usize,
    pub burn_in_mode: BurnInMode,
    pub n_paths: usize,
    pub thermostat: ThermostatConstants,
    /// Starting thermostat value; defaults to the diffusion `A`.
    pub initial_xi: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            path: PathConfig::default(),
            mass: MassSpec::dirac(MassMatrix::Scalar(1.0)),
            mh_enabled: true,
            temperature: 1.0,
            burn_in: 0,
            burn_in_mode: BurnInMode::Sampling,
            n_paths: 1000,
            thermostat: ThermostatConstants::default(),
            initial_xi: None,
        }
    }
}

impl SamplerConfig {
    pub fn new(path: PathConfig, mass: MassSpec, n_paths: usize) -> Self {
        Self {
            path,
            mass,
            n_paths,
            ..Self::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be at least 1"));
        }
        if self.burn_in >= self.n_paths {
            return Err(Error::invalid(
                "burn_in",
                format!("burn-in ({}) must be smaller than n_paths ({})", self.burn_in, self.n_paths),
            ));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid("temperature", format!("must be positive, got {}", self.temperature)));
        }
        if let Some(xi) = self.initial_xi {
            if !xi.is_finite() {
                return Err(Error::invalid("initial_xi", "must be finite"));
            }
        }
        self.thermostat.validate()?;
        self.mass.check_dim(dim)
    }

    fn initial_xi(&self) -> f64 {
        self.initial_xi.unwrap_or(self.thermostat.diffusion)
    }
}

/// What happened on one path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    /// [`MassMatrix::log10_scale`] of the mass used; NaN for mass-free samplers.
    pub log10_mass: f64,
    pub steps: usize,
    /// Hamiltonian at the start and end of the path; NaN when not evaluated.
    pub h_current: f64,
    pub h_proposed: f64,
    pub accepted: bool,
    pub divergent: bool,
    /// Thermostat value after the path; NaN for samplers without one.
    pub xi: f64,
}

/// Samples and per-path records of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    dim: usize,
    burn_in: usize,
    /// Post-burn-in states, row-major `len × dim`.
    samples: Vec<f64>,
    records: Vec<PathRecord>,
    final_state: StateVector,
}

impl Chain {
    fn with_capacity(dim: usize, burn_in: usize, n_paths: usize, start: StateVector) -> Self {
        Self {
            dim,
            burn_in,
            samples: Vec::with_capacity((n_paths - burn_in) * dim),
            records: Vec::with_capacity(n_paths),
            final_state: start,
        }
    }

    fn push(&mut self, x: &[f64], record: PathRecord) {
        if self.records.len() >= self.burn_in {
            self.samples.extend_from_slice(x);
        }
        self.records.push(record);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of collected (post-burn-in) samples.
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.samples.chunks_exact(self.dim)
    }

    /// Flat row-major sample buffer.
    pub fn raw_samples(&self) -> &[f64] {
        &self.samples
    }

    /// All values of coordinate `k` in chain order.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.samples().map(|s| s[k]).collect()
    }

    /// Records for every path, burn-in included.
    pub fn records(&self) -> &[PathRecord] {
        &self.records
    }

    /// Records of the collected paths only.
    pub fn sampling_records(&self) -> &[PathRecord] {
        &self.records[self.burn_in..]
    }

    /// Fraction of collected paths that were accepted.
    pub fn acceptance_rate(&self) -> f64 {
        let recs = self.sampling_records();
        recs.iter().filter(|r| r.accepted).count() as f64 / recs.len() as f64
    }

    pub fn divergent_count(&self) -> usize {
        self.records.iter().filter(|r| r.divergent).count()
    }

    /// Thermostat values after each collected path.
    pub fn xi_trace(&self) -> Vec<f64> {
        self.sampling_records().iter().map(|r| r.xi).collect()
    }

    /// State after the last path.
    pub fn final_state(&self) -> &StateVector {
        &self.final_state
    }
}

/// `u < min(1, exp((H_current - H_proposed) / T))`; non-finite proposals are rejected.
pub fn mh_accept(h_current: f64, h_proposed: f64, temperature: f64, u: f64) -> bool {
    if !h_proposed.is_finite() {
        return false;
    }
    let log_ratio = (h_current - h_proposed) / temperature;
    log_ratio >= 0.0 || u < log_ratio.exp()
}

/// How the starting momentum of a path is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentumStart {
    /// `q ~ N(0, M)`.
    Resample,
    /// `q = 0`.
    Zero,
}

/// Outcome of [`hmc_transition`].
#[derive(Clone, Copy, Debug)]
pub struct Transition {
    pub accepted: bool,
    pub divergent: bool,
    pub steps: usize,
    pub h_current: f64,
    pub h_proposed: f64,
}

/// One HMC path under a given mass: draw momentum, integrate, accept or reject.
///
/// `x` is replaced by the proposal only on acceptance, so a rejection leaves
/// it bit-for-bit unchanged. With `mh` set to `None` every non-divergent
/// proposal is accepted; otherwise it holds the temperature.
pub fn hmc_transition<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    x: &mut StateVector,
    mass: &MassMatrix,
    path: &PathConfig,
    momentum: MomentumStart,
    mh: Option<f64>,
    rng: &mut R,
) -> Transition {
    let dim = x.dim();
    let q = match momentum {
        MomentumStart::Resample => mass.sample_momentum(dim, rng),
        MomentumStart::Zero => Momentum::zeros(dim),
    };
    let steps = path.draw_steps(rng);
    let h_current = target.potential(x) + 0.5 * mass.inverse_quadratic_form(&q);
    let out = leapfrog_path(target, x, &q, mass, path.step_size(), steps);
    finish_transition(target, x, mass, out, steps, h_current, mh, rng)
}

#[allow(clippy::too_many_arguments)]
fn finish_transition<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    x: &mut StateVector,
    mass: &MassMatrix,
    out: crate::integrators::PathOutcome,
    steps: usize,
    h_current: f64,
    mh: Option<f64>,
    rng: &mut R,
) -> Transition {
    if out.divergent {
        return Transition {
            accepted: false,
            divergent: true,
            steps,
            h_current,
            h_proposed: f64::INFINITY,
        };
    }
    let h_proposed = target.potential(&out.position) + 0.5 * mass.inverse_quadratic_form(&out.momentum);
    let accepted = match mh {
        Some(temperature) => mh_accept(h_current, h_proposed, temperature, uniform(rng)),
        None => h_proposed.is_finite(),
    };
    if accepted {
        *x = out.position;
    }
    Transition {
        accepted,
        divergent: false,
        steps,
        h_current,
        h_proposed,
    }
}

fn check_start<T: Target + ?Sized>(target: &T, x_init: &[f64], config: &SamplerConfig) -> Result<()> {
    check_dim(target.dim(), x_init.len())?;
    if is_divergent(x_init) {
        return Err(Error::invalid("initial state", "must be finite"));
    }
    config.validate(x_init.len())
}

fn path_mode(config: &SamplerConfig, path_index: usize) -> (MomentumStart, Option<f64>) {
    let descent = path_index < config.burn_in && config.burn_in_mode == BurnInMode::GradientDescent;
    if descent {
        (MomentumStart::Zero, None)
    } else {
        (MomentumStart::Resample, config.mh_enabled.then_some(config.temperature))
    }
}

/// Runs `config.n_paths` QHMC paths from `x_init`.
pub fn qhmc_sample<T: Target + ?Sized, R: Rng + ?Sized>(
    config: &SamplerConfig,
    target: &T,
    x_init: &[f64],
    rng: &mut R,
) -> Result<Chain> {
    check_start(target, x_init, config)?;
    let mut x = StateVector(x_init.to_vec());
    let mut chain = Chain::with_capacity(x.dim(), config.burn_in, config.n_paths, x.clone());
    for t in 0..config.n_paths {
        let mass = config.mass.sample(rng);
        let (momentum, mh) = path_mode(config, t);
        let tr = hmc_transition(target, &mut x, &mass, &config.path, momentum, mh, rng);
        chain.push(
            &x,
            PathRecord {
                log10_mass: mass.log10_scale(),
                steps: tr.steps,
                h_current: tr.h_current,
                h_proposed: tr.h_proposed,
                accepted: tr.accepted,
                divergent: tr.divergent,
                xi: f64::NAN,
            },
        );
    }
    chain.final_state = x;
    Ok(chain)
}

/// Runs the stochastic-gradient thermostat sampler.
///
/// Each path draws a minibatch, a mass and a momentum, runs a thermostat path
/// on the minibatch potential and applies an MH test to the minibatch
/// Hamiltonian, evaluating both endpoints on that same batch. `ξ` carries
/// over from path to path whether or not the proposal is accepted.
pub fn qsgnht_sample<L: RecordLosses, R: Rng + ?Sized>(
    config: &SamplerConfig,
    target: &StochasticTarget<L>,
    x_init: &[f64],
    rng: &mut R,
) -> Result<Chain> {
    check_start(target, x_init, config)?;
    let dim = x_init.len();
    let mut x = StateVector(x_init.to_vec());
    let mut xi = config.initial_xi();
    let mut chain = Chain::with_capacity(dim, config.burn_in, config.n_paths, x.clone());
    for t in 0..config.n_paths {
        let batch = target.sample_batch(rng);
        let batch_target = target.on_batch(&batch);
        let mass = config.mass.sample(rng);
        let (momentum, mh) = path_mode(config, t);
        let tr = if momentum == MomentumStart::Zero {
            hmc_transition(&batch_target, &mut x, &mass, &config.path, momentum, mh, rng)
        } else {
            let q = mass.sample_momentum(dim, rng);
            let steps = config.path.draw_steps(rng);
            let h_current = batch_target.potential(&x) + 0.5 * mass.inverse_quadratic_form(&q);
            let out = thermostat_path(
                &batch_target,
                &x,
                &q,
                &mut xi,
                &mass,
                config.path.step_size(),
                steps,
                &config.thermostat,
                rng,
            );
            finish_transition(&batch_target, &mut x, &mass, out, steps, h_current, mh, rng)
        };
        chain.push(
            &x,
            PathRecord {
                log10_mass: mass.log10_scale(),
                steps: tr.steps,
                h_current: tr.h_current,
                h_proposed: tr.h_proposed,
                accepted: tr.accepted,
                divergent: tr.divergent,
                xi,
            },
        );
    }
    chain.final_state = x;
    Ok(chain)
}

/// Stochastic-gradient comparison samplers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// The thermostat sampler with the mass fixed at the median of the configured law.
    Sgnht,
    /// As SGNHT but with `ξ` frozen at 1.
    Sghmc,
    /// Momentum-free Langevin updates `x ← x - ε∇Ũ(x) + √(2ε) z`, one fresh
    /// minibatch per step, no MH test.
    Sgld,
}

pub fn baseline_sample<L: RecordLosses, R: Rng + ?Sized>(
    baseline: Baseline,
    config: &SamplerConfig,
    target: &StochasticTarget<L>,
    x_init: &[f64],
    rng: &mut R,
) -> Result<Chain> {
    match baseline {
        Baseline::Sgnht => {
            let cfg = SamplerConfig {
                mass: config.mass.median_dirac()?,
                ..config.clone()
            };
            qsgnht_sample(&cfg, target, x_init, rng)
        }
        Baseline::Sghmc => {
            let cfg = SamplerConfig {
                mass: config.mass.median_dirac()?,
                thermostat: ThermostatConstants {
                    thermal_mass: f64::INFINITY,
                    ..config.thermostat
                },
                initial_xi: Some(1.0),
                ..config.clone()
            };
            qsgnht_sample(&cfg, target, x_init, rng)
        }
        Baseline::Sgld => sgld_sample(config, target, x_init, rng),
    }
}

fn sgld_sample<L: RecordLosses, R: Rng + ?Sized>(
    config: &SamplerConfig,
    target: &StochasticTarget<L>,
    x_init: &[f64],
    rng: &mut R,
) -> Result<Chain> {
    check_start(target, x_init, config)?;
    let dim = x_init.len();
    let eps = config.path.step_size();
    let noise = (2.0 * eps).sqrt();
    let mut x = StateVector(x_init.to_vec());
    let mut g = vec![0.0; dim];
    let mut chain = Chain::with_capacity(dim, config.burn_in, config.n_paths, x.clone());
    for _ in 0..config.n_paths {
        let steps = config.path.draw_steps(rng);
        let mut divergent = false;
        for _ in 0..steps {
            let batch = target.sample_batch(rng);
            target.minibatch_gradient_into(&x, &batch, &mut g);
            let mut next = x.clone();
            for (xk, gk) in next.iter_mut().zip(&g) {
                *xk += -eps * gk + noise * standard_normal(rng);
            }
            if is_divergent(&next) {
                divergent = true;
                break;
            }
            x = next;
        }
        chain.push(
            &x,
            PathRecord {
                log10_mass: f64::NAN,
                steps,
                h_current: f64::NAN,
                h_proposed: f64::NAN,
                accepted: !divergent,
                divergent,
                xi: f64::NAN,
            },
        );
    }
    chain.final_state = x;
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::targets::{QuadraticRecords, QuadraticTarget};

    #[test]
    fn mh_rule() {
        assert!(mh_accept(2.0, 1.0, 1.0, 0.999_999));
        assert!(mh_accept(1.0, 1.0, 1.0, 0.999_999));
        let e = (-1f64).exp();
        assert!(mh_accept(1.0, 2.0, 1.0, e - 1e-12));
        assert!(!mh_accept(1.0, 2.0, 1.0, e));
        assert!(!mh_accept(1.0, f64::NAN, 1.0, 0.0));
        assert!(!mh_accept(1.0, f64::INFINITY, 1.0, 0.0));
    }

    #[test]
    fn mh_acceptance_frequency() {
        let mut rng = seeded(1);
        let n = 100_000;
        let hits = (0..n).filter(|_| mh_accept(0.0, 2.0, 1.0, uniform(&mut rng))).count();
        let frac = hits as f64 / n as f64;
        assert!((frac - (-2f64).exp()).abs() < 0.01, "{frac}");
    }

    #[test]
    fn chain_bookkeeping() {
        let t = QuadraticTarget::scalar(1.0);
        let mut cfg = SamplerConfig::new(PathConfig::fixed(0.3, 5).unwrap(), MassSpec::fixed_scalar(1.0).unwrap(), 50);
        cfg.burn_in = 10;
        let chain = qhmc_sample(&cfg, &t, &[0.0], &mut seeded(2)).unwrap();
        assert_eq!(chain.len(), 40);
        assert_eq!(chain.records().len(), 50);
        let rate = chain.acceptance_rate();
        assert!((0.0..=1.0).contains(&rate));
        assert_eq!(chain.sample(39), &chain.final_state()[..]);
    }

    #[test]
    fn validation_errors() {
        let t = QuadraticTarget::scalar(1.0);
        let mut cfg = SamplerConfig::default();
        cfg.burn_in = cfg.n_paths;
        assert!(qhmc_sample(&cfg, &t, &[0.0], &mut seeded(0)).unwrap_err().is_validation());
        let cfg = SamplerConfig::default();
        assert!(matches!(
            qhmc_sample(&cfg, &t, &[0.0, 1.0], &mut seeded(0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(qhmc_sample(&cfg, &t, &[f64::NAN], &mut seeded(0)).is_err());
    }

    #[test]
    fn sghmc_keeps_xi_at_one() {
        let recs = QuadraticRecords::split_standard_normal(100, 1, 1.0, &mut seeded(3)).unwrap();
        let st = StochasticTarget::new(recs, 10).unwrap();
        let cfg = SamplerConfig::new(PathConfig::default(), MassSpec::scalar_log_normal(0.0, 1.0).unwrap(), 200);
        let chain = baseline_sample(Baseline::Sghmc, &cfg, &st, &[0.0], &mut seeded(4)).unwrap();
        assert!(chain.xi_trace().iter().all(|&xi| xi == 1.0));
    }

    #[test]
    fn gradient_descent_burn_in_moves_downhill() {
        let t = QuadraticTarget::scalar(1.0);
        let mut cfg = SamplerConfig::new(PathConfig::fixed(0.1, 5).unwrap(), MassSpec::fixed_scalar(1.0).unwrap(), 101);
        cfg.burn_in = 100;
        cfg.burn_in_mode = BurnInMode::GradientDescent;
        let chain = qhmc_sample(&cfg, &t, &[5.0], &mut seeded(5)).unwrap();
        let descent: Vec<f64> = chain.records()[..100].iter().map(|r| r.h_current).collect();
        assert!(descent.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(chain.records()[..100].iter().all(|r| r.accepted));
    }
}
