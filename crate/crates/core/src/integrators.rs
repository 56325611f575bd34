//! Path simulation: the leapfrog integrator and the Nosé–Hoover thermostat step.
//!
//! A path starts from `(x₀, q₀)` under one mass matrix `M` and runs a number
//! of steps of size `ε`. Any coordinate that becomes non-finite or exceeds
//! [`DIVERGENCE_BOUND`] in magnitude ends the path early and marks it
//! divergent; samplers reject divergent proposals.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mass::MassMatrix;
use crate::rng::standard_normal;
use crate::state::{Momentum, StateVector};
use crate::targets::Target;

/// Magnitude beyond which a coordinate counts as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e10;

pub fn is_divergent(v: &[f64]) -> bool {
    v.iter().any(|c| !(c.abs() <= DIVERGENCE_BOUND))
}

/// How many leapfrog steps a path takes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLength {
    Fixed(usize),
    /// Randomised HMC: integration time `t ~ Exp(mean τ)` per path, `L = max(1, round(t/ε))`.
    Exponential { mean_time: f64 },
}

/// Step size and path length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathConfigRepr", into = "PathConfigRepr")]
pub struct PathConfig {
    step_size: f64,
    length: PathLength,
}

#[derive(Serialize, Deserialize)]
struct PathConfigRepr {
    step_size: f64,
    length: PathLength,
}

impl TryFrom<PathConfigRepr> for PathConfig {
    type Error = Error;
    fn try_from(r: PathConfigRepr) -> Result<Self> {
        PathConfig::new(r.step_size, r.length)
    }
}

impl From<PathConfig> for PathConfigRepr {
    fn from(c: PathConfig) -> Self {
        PathConfigRepr {
            step_size: c.step_size,
            length: c.length,
        }
    }
}

impl Default for PathConfig {
    /// `ε = 0.03`, `L = 5`.
    fn default() -> Self {
        Self {
            step_size: 0.03,
            length: PathLength::Fixed(5),
        }
    }
}

impl PathConfig {
    pub fn new(step_size: f64, length: PathLength) -> Result<Self> {
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(Error::invalid("step size", format!("must be positive, got {step_size}")));
        }
        match length {
            PathLength::Fixed(0) => return Err(Error::invalid("path length", "must be at least 1")),
            PathLength::Exponential { mean_time } if !(mean_time.is_finite() && mean_time > 0.0) => {
                return Err(Error::invalid("path length", format!("mean time must be positive, got {mean_time}")))
            }
            _ => {}
        }
        Ok(Self { step_size, length })
    }

    pub fn fixed(step_size: f64, steps: usize) -> Result<Self> {
        Self::new(step_size, PathLength::Fixed(steps))
    }

    pub fn exponential(step_size: f64, mean_time: f64) -> Result<Self> {
        Self::new(step_size, PathLength::Exponential { mean_time })
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn length(&self) -> PathLength {
        self.length
    }

    /// Number of steps for the next path. Fixed lengths consume no randomness.
    pub fn draw_steps<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.length {
            PathLength::Fixed(l) => l,
            PathLength::Exponential { mean_time } => {
                let t = Exp::new(1.0 / mean_time).expect("validated rate").sample(rng);
                ((t / self.step_size).round() as usize).max(1)
            }
        }
    }
}

/// End point of a simulated path.
#[derive(Clone, Debug)]
pub struct PathOutcome {
    pub position: StateVector,
    pub momentum: Momentum,
    /// Set when the path left the finite region; the state is where it stopped.
    pub divergent: bool,
}

/// Leapfrog path of `steps` steps under a fixed mass:
///
/// ```text
/// q ← q - ε/2 ∇U(x)
/// repeat L-1 times:  x ← x + ε M⁻¹q;  q ← q - ε ∇U(x)
/// x ← x + ε M⁻¹q;  q ← q - ε/2 ∇U(x)
/// ```
pub fn leapfrog_path<T: Target + ?Sized>(
    target: &T,
    x0: &[f64],
    q0: &[f64],
    mass: &MassMatrix,
    step_size: f64,
    steps: usize,
) -> PathOutcome {
    let eps = step_size;
    let mut x = x0.to_vec();
    let mut q = q0.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let finish = |x: Vec<f64>, q: Vec<f64>, divergent| PathOutcome {
        position: StateVector(x),
        momentum: Momentum(q),
        divergent,
    };

    target.gradient_into(&x, &mut g);
    for (qk, gk) in q.iter_mut().zip(&g) {
        *qk -= 0.5 * eps * gk;
    }
    for i in 0..steps {
        mass.inverse_apply_into(&q, &mut v);
        for (xk, vk) in x.iter_mut().zip(&v) {
            *xk += eps * vk;
        }
        if is_divergent(&x) {
            return finish(x, q, true);
        }
        target.gradient_into(&x, &mut g);
        let kick = if i + 1 == steps { 0.5 * eps } else { eps };
        for (qk, gk) in q.iter_mut().zip(&g) {
            *qk -= kick * gk;
        }
        if is_divergent(&q) {
            return finish(x, q, true);
        }
    }
    finish(x, q, false)
}

/// One kick-drift-kick step, for energy traces and step-level tests.
///
/// `grad` must hold `∇U(x)` on entry and holds `∇U(x_new)` on exit.
pub fn leapfrog_step<T: Target + ?Sized>(
    target: &T,
    x: &mut [f64],
    q: &mut [f64],
    grad: &mut [f64],
    mass: &MassMatrix,
    step_size: f64,
) {
    let half = 0.5 * step_size;
    for (qk, gk) in q.iter_mut().zip(grad.iter()) {
        *qk -= half * gk;
    }
    let v = mass.inverse_apply(q);
    for (xk, vk) in x.iter_mut().zip(&v) {
        *xk += step_size * vk;
    }
    target.gradient_into(x, grad);
    for (qk, gk) in q.iter_mut().zip(grad.iter()) {
        *qk -= half * gk;
    }
}

/// Thermal mass `m_μ`, diffusion `A` and temperature `T` of the thermostat.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermostatConstants {
    /// `f64::INFINITY` freezes `ξ` (the SGHMC limit). Written as `null` in JSON.
    #[serde(with = "infinite_as_null")]
    pub thermal_mass: f64,
    pub diffusion: f64,
    pub temperature: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for ThermostatConstants {
    fn default() -> Self {
        Self {
            thermal_mass: 1.0,
            diffusion: 1.0,
            temperature: 1.0,
        }
    }
}

impl ThermostatConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.thermal_mass > 0.0) {
            return Err(Error::invalid("thermal mass", format!("must be positive, got {}", self.thermal_mass)));
        }
        if !(self.diffusion.is_finite() && self.diffusion >= 0.0) {
            return Err(Error::invalid("diffusion", format!("must be non-negative, got {}", self.diffusion)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid("temperature", format!("must be positive, got {}", self.temperature)));
        }
        Ok(())
    }

    pub fn is_frozen(&self) -> bool {
        self.thermal_mass.is_infinite()
    }
}

/// Phase-space point plus the thermostat variable `ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermostatState {
    pub x: StateVector,
    pub q: Momentum,
    pub xi: f64,
}

/// One thermostat step:
///
/// ```text
/// x ← x + ε M⁻¹q
/// q ← q - ε ∇Ũ(x) - ε ξ M⁻¹q + √(2Aε) z
/// ξ ← ξ + (ε/m_μ) (‖M⁻¹q‖² - T Tr(M⁻¹))
/// ```
///
/// The friction acts on the velocity `M⁻¹q` and `ξ` tracks the velocity
/// second moment, so the stationary `ξ` is `A` for every mass. With
/// `M = I` these reduce to the textbook `-ξq` and `qᵀq - T d` updates.
/// The friction uses the momentum before the update and the `ξ` update uses
/// the momentum after it. With `A = 0` no normal draws are made. Returns
/// `true` if the state diverged.
pub fn thermostat_step<T: Target + ?Sized, R: Rng + ?Sized>(
    state: &mut ThermostatState,
    target: &T,
    mass: &MassMatrix,
    step_size: f64,
    constants: &ThermostatConstants,
    rng: &mut R,
) -> bool {
    let eps = step_size;
    let dim = state.x.len();
    let mut v = vec![0.0; dim];
    mass.inverse_apply_into(&state.q, &mut v);
    for (xk, vk) in state.x.iter_mut().zip(&v) {
        *xk += eps * vk;
    }
    if is_divergent(&state.x) {
        return true;
    }
    let mut g = vec![0.0; dim];
    target.gradient_into(&state.x, &mut g);
    let noise_scale = (2.0 * constants.diffusion * eps).sqrt();
    let xi = state.xi;
    for ((qk, gk), vk) in state.q.iter_mut().zip(&g).zip(&v) {
        let noise = if constants.diffusion > 0.0 {
            noise_scale * standard_normal(rng)
        } else {
            0.0
        };
        *qk = *qk - eps * gk - eps * xi * vk + noise;
    }
    if !constants.is_frozen() {
        mass.inverse_apply_into(&state.q, &mut v);
        let speed2: f64 = v.iter().map(|vk| vk * vk).sum();
        let mismatch = speed2 - constants.temperature * mass.trace_inverse(dim);
        state.xi += eps / constants.thermal_mass * mismatch;
    }
    is_divergent(&state.q) || !state.xi.is_finite()
}

/// A full thermostat path: a closing-half-kick frame around `steps - 1`
/// thermostat steps, mirroring [`leapfrog_path`].
///
/// ```text
/// q ← q - ε/2 ∇Ũ(x)
/// repeat L-1 times: thermostat_step
/// x ← x + ε M⁻¹q;  q ← q - ε/2 ∇Ũ(x)
/// ```
///
/// With `A = 0` and `ξ` frozen at zero this is exactly [`leapfrog_path`].
/// `xi` is updated in place and keeps its value even if the path is later
/// rejected.
#[allow(clippy::too_many_arguments)]
pub fn thermostat_path<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    x0: &[f64],
    q0: &[f64],
    xi: &mut f64,
    mass: &MassMatrix,
    step_size: f64,
    steps: usize,
    constants: &ThermostatConstants,
    rng: &mut R,
) -> PathOutcome {
    let eps = step_size;
    let dim = x0.len();
    let mut g = vec![0.0; dim];
    target.gradient_into(x0, &mut g);
    let mut state = ThermostatState {
        x: StateVector(x0.to_vec()),
        q: Momentum(q0.iter().zip(&g).map(|(q, g)| q - 0.5 * eps * g).collect()),
        xi: *xi,
    };
    let outcome = |state: ThermostatState, divergent| PathOutcome {
        position: state.x,
        momentum: state.q,
        divergent,
    };
    for _ in 1..steps {
        let diverged = thermostat_step(&mut state, target, mass, eps, constants, rng);
        if state.xi.is_finite() {
            *xi = state.xi;
        }
        if diverged {
            return outcome(state, true);
        }
    }
    let mut v = vec![0.0; dim];
    mass.inverse_apply_into(&state.q, &mut v);
    for (xk, vk) in state.x.iter_mut().zip(&v) {
        *xk += eps * vk;
    }
    if is_divergent(&state.x) {
        return outcome(state, true);
    }
    target.gradient_into(&state.x, &mut g);
    for (qk, gk) in state.q.iter_mut().zip(&g) {
        *qk -= 0.5 * eps * gk;
    }
    let divergent = is_divergent(&state.q);
    outcome(state, divergent)
}
