//! Log-domain solver for the singular BIC equation system.
//!
//! For every model `M_i` and submodel `M_j ⪯ M_i` the per-pair marginal
//! likelihood approximation is
//!
//! ```text
//! log L'_ij = ℓ_i − λ_ij · log n + (m_ij − 1) · log log n
//! ```
//!
//! with `ℓ_i` the maximized log-likelihood of `M_i`. The scores
//! `L'(M_i) = exp(sBIC(M_i))` are the unique positive solution of
//!
//! ```text
//! Σ_{j ⪯ i} [L'(M_i) − L'_ij] · L'(M_j) · P(M_j) = 0,   i ∈ I,
//! ```
//!
//! i.e. each `L'(M_i)` is a weighted average of the `L'_ij` with weights
//! `L'(M_j) P(M_j)`. Processing the models along a linear extension of the
//! poset turns each equation into a quadratic with exactly one positive
//! root:
//!
//! ```text
//! x² + (B − A)·x − C = 0,
//! A = L'_ii,
//! B = Σ_{j ≺ i} L'(M_j) P(M_j)/P(M_i),
//! C = Σ_{j ≺ i} L'_ij L'(M_j) P(M_j)/P(M_i).
//! ```
//!
//! The `L'` values underflow `f64` for realistic likelihoods, so everything
//! here is computed with logarithms: `log A`, `log B`, `log C` come from
//! log-sum-exp, and the root is recovered after shifting by
//! `K = max(log A, log B, log C / 2)`, which bounds all shifted quantities
//! by 1 (`b̃ = e^{log B − K} − e^{log A − K}`, `c̃ = e^{log C − 2K}`). For a
//! positive shifted linear term the root is taken as `2c/(b + √(b² + 4c))`
//! so that no cancellation occurs in either branch.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::coefficients::{
    validate_matrix, CoefficientMatrix, LearningCoefficient, ValidationReport,
};
use crate::math;
use crate::poset::{ModelId, ModelPoset};

/// Smallest admissible sample size; `log log n` must be positive.
pub const MIN_SAMPLE_SIZE: u64 = 3;

/// Convergence tolerance of [`fixed_point_oracle`], measured as the largest
/// log-scale step of one sweep.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("sample size n = {n} is below the minimum of {MIN_SAMPLE_SIZE}")]
    SampleSize { n: u64 },
    #[error("{what} does not match the number of models")]
    Shape { what: &'static str },
    #[error("log-likelihood of model {id} is not finite")]
    NonFiniteLoglik { id: ModelId },
    #[error("prior weight of model {id} must be positive and finite")]
    InvalidPrior { id: ModelId },
    #[error("coefficient validation failed: {0}")]
    Validation(ValidationReport),
    #[error("model id {0} is not a member of the poset")]
    UnknownId(ModelId),
    #[error("non-finite intermediate value in {context}")]
    NonFinite { context: &'static str },
    #[error("fixed-point iteration did not converge within {iterations} sweeps")]
    NonConvergence { iterations: usize },
}

/// Everything needed to score a family of models.
#[derive(Clone, Debug)]
pub struct SbicInput {
    pub poset: ModelPoset,
    /// Maximized log-likelihood per model (natural log).
    pub loglik: Vec<f64>,
    /// Sample size, at least [`MIN_SAMPLE_SIZE`].
    pub n: u64,
    /// `(λ_ij, m_ij)` for every pair `j ⪯ i`.
    pub coefficients: CoefficientMatrix,
    /// Positive prior weights; only ratios matter, no normalization needed.
    pub prior: Vec<f64>,
    /// Model dimensions for the BIC baseline.
    pub dims: Vec<usize>,
}

impl SbicInput {
    /// Input with the default uniform prior on models.
    pub fn with_uniform_prior(
        poset: ModelPoset,
        loglik: Vec<f64>,
        n: u64,
        coefficients: CoefficientMatrix,
        dims: Vec<usize>,
    ) -> Self {
        let prior = vec![1.0; poset.len()];
        SbicInput {
            poset,
            loglik,
            n,
            coefficients,
            prior,
            dims,
        }
    }

    /// Schwarz's criterion `ℓ_i − (d_i/2)·log n` for one model.
    pub fn bic(&self, i: ModelId) -> Result<f64, SolveError> {
        if !self.poset.contains(i) {
            return Err(SolveError::UnknownId(i));
        }
        let ln_n = math::ln(self.n as f64);
        Ok(self.loglik[i.index()] - self.dims[i.index()] as f64 / 2.0 * ln_n)
    }

    /// Checks all input invariants; [`solve`] calls this first.
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.n < MIN_SAMPLE_SIZE {
            return Err(SolveError::SampleSize { n: self.n });
        }
        let k = self.poset.len();
        if self.loglik.len() != k {
            return Err(SolveError::Shape { what: "loglik" });
        }
        if self.prior.len() != k {
            return Err(SolveError::Shape { what: "prior" });
        }
        if self.dims.len() != k {
            return Err(SolveError::Shape { what: "dims" });
        }
        for i in self.poset.ids() {
            if !self.loglik[i.index()].is_finite() {
                return Err(SolveError::NonFiniteLoglik { id: i });
            }
            let w = self.prior[i.index()];
            if !(w.is_finite() && w > 0.0) {
                return Err(SolveError::InvalidPrior { id: i });
            }
        }
        let report = validate_matrix(&self.poset, &self.coefficients, &self.dims);
        if !report.is_clean() {
            return Err(SolveError::Validation(report));
        }
        Ok(())
    }
}

/// Scores produced by [`solve`].
#[derive(Clone, Debug)]
pub struct SbicResult {
    /// `sBIC(M_i) = log L'(M_i)` per model.
    pub sbic: Vec<f64>,
    /// Schwarz's BIC per model.
    pub bic: Vec<f64>,
    /// `ℓ_i − sBIC(M_i)`; bounded by `(d_i/2)·log n`.
    pub penalty: Vec<f64>,
    /// `log L'_ij` for every pair `j ⪯ i`, keyed `(model, submodel)`.
    pub log_lprime: BTreeMap<(ModelId, ModelId), f64>,
    /// Softmax of the sBIC scores.
    pub posterior_sbic: Vec<f64>,
    /// Softmax of the BIC scores.
    pub posterior_bic: Vec<f64>,
}

/// `log L'_ij = ℓ − λ·log n + (m − 1)·log log n`.
pub fn log_lprime(
    loglik: f64,
    n: u64,
    coefficient: &LearningCoefficient,
) -> Result<f64, SolveError> {
    if n < MIN_SAMPLE_SIZE {
        return Err(SolveError::SampleSize { n });
    }
    let ln_n = math::ln(n as f64);
    Ok(loglik - coefficient.lambda().to_f64() * ln_n
        + f64::from(coefficient.multiplicity() - 1) * math::ln(ln_n))
}

/// Log of the positive root of `x² + (B − A)x − C = 0`, given the logs of
/// the positive quantities `A`, `B`, `C`.
fn positive_root_log(log_a: f64, log_b: f64, log_c: f64) -> f64 {
    let shift = log_a.max(log_b).max(0.5 * log_c);
    let a = math::exp(log_a - shift);
    let b = math::exp(log_b - shift) - a;
    let c = math::exp(log_c - 2.0 * shift);
    if b > 0.0 {
        // root = 2C / (b + √(b² + 4C)), evaluated with the exact log C
        core::f64::consts::LN_2 + log_c - shift - math::ln(b + math::sqrt(b * b + 4.0 * c))
    } else {
        let s = -b + math::sqrt(b * b + 4.0 * c);
        if s > 0.0 {
            shift + math::ln(0.5 * s)
        } else {
            // b = 0 and C underflowed even after shifting: root = √C
            0.5 * log_c
        }
    }
}

/// Solves the equation system and assembles all scores.
///
/// Models are processed along a linear extension; minimal models get
/// `sBIC = log L'_ii` (the BIC with `λ_ii`, `m_ii`), every other model the
/// log of the positive root of its quadratic. Each solved score is a
/// weighted average of the `L'_ij`, so it is clamped to
/// `[min_j log L'_ij, max_j log L'_ij]`, which removes the last ulp of
/// floating-point spill without affecting exact roots.
pub fn solve(input: &SbicInput) -> Result<SbicResult, SolveError> {
    input.validate()?;
    let poset = &input.poset;
    let k = poset.len();
    let ln_n = math::ln(input.n as f64);

    let mut log_lprime_matrix = BTreeMap::new();
    for i in poset.ids() {
        for j in poset.down_set(i).expect("id comes from the poset") {
            let coefficient = input
                .coefficients
                .get(i, j)
                .expect("entry exists after validation");
            log_lprime_matrix.insert(
                (i, j),
                log_lprime(input.loglik[i.index()], input.n, &coefficient)?,
            );
        }
    }

    let log_prior: Vec<f64> = input.prior.iter().map(|&w| math::ln(w)).collect();
    let mut sbic = vec![f64::NAN; k];
    for i in poset.linear_extension() {
        let log_a = log_lprime_matrix[&(i, i)];
        let strict = poset.strict_down_set(i).expect("id comes from the poset");
        if strict.is_empty() {
            sbic[i.index()] = log_a;
            continue;
        }
        let weights: Vec<f64> = strict
            .iter()
            .map(|j| sbic[j.index()] + log_prior[j.index()] - log_prior[i.index()])
            .collect();
        let log_b = math::logsumexp(&weights);
        let cross: Vec<f64> = strict
            .iter()
            .zip(&weights)
            .map(|(&j, &w)| log_lprime_matrix[&(i, j)] + w)
            .collect();
        let log_c = math::logsumexp(&cross);
        let root = positive_root_log(log_a, log_b, log_c);

        let mut lo = log_a;
        let mut hi = log_a;
        for &j in &strict {
            let term = log_lprime_matrix[&(i, j)];
            lo = lo.min(term);
            hi = hi.max(term);
        }
        sbic[i.index()] = root.clamp(lo, hi);
    }

    if sbic.iter().any(|x| !x.is_finite()) {
        return Err(SolveError::NonFinite {
            context: "sBIC scores",
        });
    }

    let bic: Vec<f64> = poset
        .ids()
        .map(|i| input.loglik[i.index()] - input.dims[i.index()] as f64 / 2.0 * ln_n)
        .collect();
    let penalty: Vec<f64> = poset
        .ids()
        .map(|i| input.loglik[i.index()] - sbic[i.index()])
        .collect();
    let posterior_sbic = posterior_probabilities(&sbic)?;
    let posterior_bic = posterior_probabilities(&bic)?;
    Ok(SbicResult {
        sbic,
        bic,
        penalty,
        log_lprime: log_lprime_matrix,
        posterior_sbic,
        posterior_bic,
    })
}

/// Largest relative defect of the equation system at the solved scores.
///
/// For each model the defect `|Σ_j (L'(M_i) − L'_ij) L'(M_j) P(M_j)|` is
/// normalized by `Σ_j L'(M_i) L'(M_j) P(M_j)`; both sums are evaluated in a
/// common shifted scale so the ratio is meaningful for any magnitude.
pub fn residual(input: &SbicInput, result: &SbicResult) -> f64 {
    let poset = &input.poset;
    let log_prior: Vec<f64> = input.prior.iter().map(|&w| math::ln(w)).collect();
    let mut worst = 0.0f64;
    for i in poset.ids() {
        let x_i = result.sbic[i.index()];
        let down = poset.down_set(i).expect("id comes from the poset");
        let mut shift = f64::NEG_INFINITY;
        for &j in &down {
            let lp = result.log_lprime[&(i, j)];
            let base = result.sbic[j.index()] + log_prior[j.index()];
            shift = shift.max(x_i.max(lp) + base);
        }
        let mut numerator = 0.0;
        let mut denominator = 0.0;
        for &j in &down {
            let lp = result.log_lprime[&(i, j)];
            let base = result.sbic[j.index()] + log_prior[j.index()];
            numerator += math::exp(x_i + base - shift) - math::exp(lp + base - shift);
            denominator += math::exp(x_i + base - shift);
        }
        worst = worst.max(numerator.abs() / denominator);
    }
    worst
}

/// Reference solver: damping-free fixed-point sweeps of the averaging form
/// of the equation system, started from `L'(M_i) = L'_ii`.
///
/// Independent of [`solve`]'s root-finding path; intended for tests. Errors
/// with [`SolveError::NonConvergence`] if the largest log-scale step still
/// exceeds [`ORACLE_TOLERANCE`] after `max_iterations` sweeps.
pub fn fixed_point_oracle(
    input: &SbicInput,
    max_iterations: usize,
) -> Result<Vec<f64>, SolveError> {
    input.validate()?;
    let poset = &input.poset;
    let mut log_lprime_matrix = BTreeMap::new();
    for i in poset.ids() {
        for j in poset.down_set(i).expect("id comes from the poset") {
            let coefficient = input
                .coefficients
                .get(i, j)
                .expect("entry exists after validation");
            log_lprime_matrix.insert(
                (i, j),
                log_lprime(input.loglik[i.index()], input.n, &coefficient)?,
            );
        }
    }
    let log_prior: Vec<f64> = input.prior.iter().map(|&w| math::ln(w)).collect();
    let mut scores: Vec<f64> = poset.ids().map(|i| log_lprime_matrix[&(i, i)]).collect();
    for _ in 0..max_iterations {
        let mut next = scores.clone();
        for i in poset.ids() {
            let down = poset.down_set(i).expect("id comes from the poset");
            let weighted: Vec<f64> = down
                .iter()
                .map(|j| scores[j.index()] + log_prior[j.index()])
                .collect();
            let numerator: Vec<f64> = down
                .iter()
                .zip(&weighted)
                .map(|(&j, &w)| log_lprime_matrix[&(i, j)] + w)
                .collect();
            next[i.index()] = math::logsumexp(&numerator) - math::logsumexp(&weighted);
        }
        let step = scores
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        scores = next;
        if step <= ORACLE_TOLERANCE {
            return Ok(scores);
        }
    }
    Err(SolveError::NonConvergence {
        iterations: max_iterations,
    })
}

/// Softmax with max subtraction; sums to one up to rounding.
pub fn posterior_probabilities(scores: &[f64]) -> Result<Vec<f64>, SolveError> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(SolveError::NonFinite {
            context: "posterior scores",
        });
    }
    let shift = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|&s| math::exp(s - shift)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}
