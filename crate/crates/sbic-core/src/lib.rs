//! Model selection over finite posets of candidate models with the singular
//! Bayesian information criterion (sBIC).
//!
//! Schwarz's BIC penalizes a model's maximized log-likelihood by
//! `(d/2)·log n`, which is justified by a quadratic approximation of the
//! log-likelihood that breaks down for singular models (mixtures, factor
//! analysis, reduced-rank regression, ...). For such models the marginal
//! likelihood instead behaves like
//!
//! ```text
//! log P(Y | M_i) ≈ log P(Y | π̂_i, M_i) − λ_ij · log n + (m_ij − 1) · log log n
//! ```
//!
//! where the learning coefficient `λ_ij` and its multiplicity `m_ij` depend
//! on the smallest submodel `M_j ⊆ M_i` containing the data-generating
//! distribution. The sBIC resolves the circularity (the true submodel is
//! unknown) by averaging the per-pair approximations with posterior weights,
//! which leads to one quadratic equation per model when the models are
//! processed along a linear extension of the inclusion poset.
//!
//! This crate provides the pieces that are pure computation:
//!
//! * [`poset`] — the finite model poset with order queries,
//! * [`rational`] — exact rational arithmetic for learning coefficients,
//! * [`coefficients`] — coefficient providers (reduced-rank regression,
//!   factor analysis, Gaussian-mixture bounds) and table validation,
//! * [`solver`] — the log-domain solver for the equation system, plus BIC,
//!   penalties and approximate posterior model probabilities.
//!
//! The crate is `no_std`-compatible (`--no-default-features --features libm`);
//! it only needs `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod coefficients;
mod math;
pub mod poset;
pub mod rational;
pub mod solver;

pub use coefficients::{CoefficientMatrix, LearningCoefficient};
pub use poset::{ModelId, ModelPoset};
pub use rational::Rational;
pub use solver::{solve, SbicInput, SbicResult};
