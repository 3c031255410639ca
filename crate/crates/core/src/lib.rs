//! Importance sampling for path-dependent options on multivariate diffusions.
//!
//! The sampling measure is shifted by a deterministic drift `h = J(f)`, where
//! `f` is a shallow feedforward network of time and `J` is the Cameron–Martin
//! map of the driving Gaussian martingale. Paths simulated under the shifted
//! measure are reweighted by the inverse Doléans exponential, and the network
//! is trained by Adam to minimize the second moment of the weighted payoff.
//!
//! Module map:
//!
//! - [`gaussian`]: time grid, covariation structure, `Λ²` inner product,
//!   Cameron–Martin map, increment sampling and log-likelihood ratios.
//! - [`ffn`]: shallow networks, backpropagation, Adam, checkpoints.
//! - [`models`]: Euler–Maruyama simulation of Black–Scholes, Heston, 3/2 and
//!   Stein & Stein models under the original and the shifted measure.
//! - [`payoffs`]: Asian basket call, knock-out variant, basket weights.
//! - [`training`]: variance functional, its gradient and the training loop.
//! - [`engine`]: plain and importance-sampled estimators and reports.
//! - [`config`] and [`pipeline`]: run configuration, parameter sampling and
//!   the end-to-end experiment used by the `isdrift` binary.

pub mod config;
pub mod engine;
pub mod error;
pub mod ffn;
pub mod gaussian;
pub mod linalg;
pub mod models;
pub mod payoffs;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
