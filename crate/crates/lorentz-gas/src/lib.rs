//! Simulation and analysis toolkit for a fast particle moving through an
//! array of soft scatterers, each carrying one internal degree of freedom
//! that exchanges energy with the particle.
//!
//! The crate is organised as a ladder of increasingly coarse models, with
//! the statistical machinery needed to check that each level agrees with
//! the next:
//!
//! * [`scatter`] — the exact two-body collision problem, solved by ODE
//!   integration: one transit of the particle through a single scatterer.
//! * [`expansion`] — the high-energy expansion of the per-collision energy
//!   transfer: chord line integrals, expansion coefficients and their
//!   ensemble averages, and the truncated step map built from them.
//! * [`chain`] — collision randomness and the Markov chains: the reflected
//!   energy chain (exact-ODE or truncated mode), the full vector chain with
//!   spatial displacement, and the rescaled interpolated process.
//! * [`diffusion`] — the weak-coupling limit: generator coefficients,
//!   reflected Euler–Maruyama paths, the stationary energy density from the
//!   zero-flux condition, and speed-space densities including the
//!   Maxwell–Boltzmann reference.
//! * [`stats`] — weighted histograms, Kolmogorov–Smirnov distances, moment
//!   estimators with jackknife errors, and mean-squared-displacement fits.
//! * [`cli`] — a batch front-end with reproducible, seeded runs emitting
//!   CSV tables and JSON summaries.
//!
//! Start with the runnable programs under `examples/`; each one exercises
//! a single capability end to end.

pub mod chain;
pub mod cli;
pub mod diffusion;
mod error;
pub mod expansion;
pub mod geometry;
pub mod quadrature;
pub mod scatter;
pub mod stats;

pub use error::{Error, Result};
