//! Hamiltonian Monte Carlo with random mass matrices.
//!
//! Every simulation path draws a fresh mass matrix `M_t ~ P_M(M)` before the
//! momentum is resampled, so the sampler explores with a spread of effective
//! step sizes instead of a single hand-tuned one. Standard HMC is recovered
//! with a Dirac mass law.
//!
//! The crate is organised bottom-up:
//!
//! * [`mass`], [`state`], [`rng`]: mass matrices, mass laws, phase-space vectors
//!   and seeded random streams.
//! * [`targets`]: potential energies (synthetic, sparse priors, bridge regression,
//!   robust matrix factorisation) plus minibatch record targets.
//! * [`integrators`]: the leapfrog path and the Nosé–Hoover thermostat step.
//! * [`samplers`]: Metropolis-corrected QHMC/HMC, the stochastic-gradient
//!   thermostat sampler and its SGNHT/SGHMC/SGLD baselines.
//! * [`diagnostics`]: Wasserstein distances, escape curves, PSNR, test MSE.
//! * [`data`]: delimited regression tables and gray-level images.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod integrators;
pub mod mass;
pub mod rng;
pub mod samplers;
pub mod state;
pub mod targets;

pub use error::{Error, Result};
pub use mass::{hamiltonian, MassLaw, MassMatrix, MassSpec};
pub use state::{Momentum, StateVector};
pub use targets::Target;
