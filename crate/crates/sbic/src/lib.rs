//! Model-selection toolkit around the singular Bayesian information
//! criterion.
//!
//! The numeric heart (posets, exact learning coefficients, the log-domain
//! equation-system solver) lives in [`sbic_core`], re-exported here as
//! [`core`]. This crate adds the model families and the apparatus around
//! them:
//!
//! * [`rrr`] — reduced-rank regression: simulation of low-rank coefficient
//!   matrices, rank-profile maximum likelihood via truncated SVD, and solver
//!   input assembly from the exact coefficient formulas;
//! * [`mixture`] — univariate Gaussian mixtures with unequal variances:
//!   restart EM with a variance floor, coefficient bounds, and the bundled
//!   galaxies data set;
//! * [`factor`] — maximum-likelihood factor analysis fitted by EM on a
//!   sample covariance matrix, with the six-variable coefficient table;
//! * [`experiment`] — a deterministic Monte Carlo harness for
//!   selection-frequency studies, with CSV output;
//! * [`fileio`] — the model-collection JSON format, data ingestion, and the
//!   result table writers;
//! * [`cli`] — the `sbic` command-line front end.

pub use sbic_core as core;

pub mod cli;
pub mod experiment;
pub mod factor;
pub mod fileio;
pub mod mixture;
pub mod rrr;
pub mod seed;
