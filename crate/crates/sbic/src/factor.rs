//! Maximum-likelihood factor analysis fitted by EM on a sample covariance.
//!
//! The model for `k` observed variables and `i` factors is
//! `Σ = ΛΛᵀ + Ψ` with `Λ ∈ R^{k×i}` and diagonal `Ψ > 0`; means are profiled
//! out, so fitting consumes only the sample covariance `S` (denominator `n`)
//! and the sample size. The log-likelihood is
//!
//! ```text
//! ℓ = −(n/2)·[k·ln 2π + ln det Σ + tr(Σ⁻¹ S)].
//! ```
//!
//! Treating the factor scores as missing data gives the usual EM updates:
//! with `β = Λᵀ Σ⁻¹`,
//!
//! ```text
//! E[zzᵀ] = I − βΛ + βSβᵀ,   C_yz = Sβᵀ,
//! Λ' = C_yz E[zzᵀ]⁻¹,       Ψ' = diag(S − Λ' C_yzᵀ),
//! ```
//!
//! and `Ψ'` is clamped below at `floor × diag(S)` per coordinate to keep
//! Heywood cases from collapsing a uniqueness to zero.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use sbic_core::coefficients::{
    fa_learning_coefficient, fa_model_dimension, CoefficientError, CoefficientMatrix,
};
use sbic_core::poset::{ModelId, ModelPoset};
use sbic_core::solver::SbicInput;

use crate::seed::stream_rng;

const EM_TOLERANCE: f64 = 1e-8;
const EM_MAX_ITERATIONS: usize = 2000;
/// Default relative uniqueness floor (× `diag(S)`).
pub const DEFAULT_UNIQUENESS_FLOOR: f64 = 1e-4;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Clone, Debug, thiserror::Error)]
pub enum FactorError {
    #[error("sample covariance must be square, symmetric, and positive definite")]
    NotPositiveDefinite,
    #[error("{factors} factors overparametrize a model on {variables} variables")]
    TooManyFactors { variables: usize, factors: usize },
    #[error("implied covariance became numerically singular during EM")]
    Degenerate,
    #[error("every EM restart failed for {factors} factors")]
    AllRestartsFailed { factors: usize },
    #[error("invalid factor-analysis setup: {reason}")]
    Invalid { reason: &'static str },
    #[error("the coefficient table covers 6 variables and at most 3 factors, got k = {variables}, max factors {factors}")]
    TableRange { variables: usize, factors: usize },
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
}

/// One fitted factor model.
#[derive(Clone, Debug)]
pub struct FactorFit {
    /// `k × i` loadings (identified up to rotation).
    pub loadings: DMatrix<f64>,
    /// Diagonal of `Ψ`.
    pub uniquenesses: DVector<f64>,
    pub loglik: f64,
    /// Accepted log-likelihood after each EM iteration; nondecreasing.
    pub loglik_trace: Vec<f64>,
}

/// Best fits for factor counts `0..=max_factors`.
#[derive(Clone, Debug)]
pub struct FactorProfile {
    pub fits: Vec<FactorFit>,
    pub variables: usize,
    pub sample_count: u64,
}

impl FactorProfile {
    pub fn max_factors(&self) -> usize {
        self.fits.len() - 1
    }

    pub fn logliks(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.loglik).collect()
    }

    /// Factor counts whose best log-likelihood dropped below the count
    /// before it.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        (1..self.fits.len())
            .filter(|&i| self.fits[i].loglik < self.fits[i - 1].loglik - EM_TOLERANCE)
            .collect()
    }
}

/// Covariance of the rows of `observations` with denominator `n`, after
/// centering each column; returns the matrix and the number of cases.
pub fn sample_covariance(observations: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let n = observations.nrows();
    let k = observations.ncols();
    let mut centered = observations.clone();
    for c in 0..k {
        let mean = centered.column(c).sum() / n as f64;
        for r in 0..n {
            centered[(r, c)] -= mean;
        }
    }
    (centered.transpose() * &centered / n as f64, n)
}

fn loglik_given_sigma(
    s: &DMatrix<f64>,
    n: u64,
    sigma: &DMatrix<f64>,
) -> Result<(f64, Cholesky<f64, nalgebra::Dyn>), FactorError> {
    let chol = Cholesky::new(sigma.clone()).ok_or(FactorError::Degenerate)?;
    let k = s.nrows();
    let log_det: f64 = (0..k).map(|j| 2.0 * chol.l_dirty()[(j, j)].ln()).sum();
    let trace = chol.solve(s).trace();
    Ok((
        -(n as f64) / 2.0 * (k as f64 * LN_2PI + log_det + trace),
        chol,
    ))
}

fn check_input(s: &DMatrix<f64>, factors: usize) -> Result<usize, FactorError> {
    let k = s.nrows();
    if k == 0 || s.ncols() != k {
        return Err(FactorError::NotPositiveDefinite);
    }
    let scale = s.amax().max(1e-300);
    for r in 0..k {
        for c in 0..r {
            if (s[(r, c)] - s[(c, r)]).abs() > 1e-8 * scale {
                return Err(FactorError::NotPositiveDefinite);
            }
        }
    }
    if Cholesky::new(s.clone()).is_none() {
        return Err(FactorError::NotPositiveDefinite);
    }
    if factors * factors.saturating_sub(1) / 2 + k * (k + 1) / 2 + k < k * (factors + 1)
    // equivalently: k(i+1) − i(i−1)/2 > k(k+1)/2 + k
    {
        return Err(FactorError::TooManyFactors {
            variables: k,
            factors,
        });
    }
    Ok(k)
}

/// Fits the `factors`-factor model to the covariance `S` by restarted EM.
///
/// `floor` is the relative uniqueness floor (× `diag(S)`). Zero factors has
/// the closed form `Ψ = diag(S)`. Restart `r` draws from the RNG stream
/// `(master_seed, factors, r)`.
pub fn fa_fit(
    s: &DMatrix<f64>,
    n: u64,
    factors: usize,
    floor: f64,
    restarts: usize,
    master_seed: u64,
) -> Result<FactorFit, FactorError> {
    let k = check_input(s, factors)?;
    if !(floor.is_finite() && floor > 0.0 && floor < 1.0) {
        return Err(FactorError::Invalid {
            reason: "uniqueness floor must lie in (0, 1)",
        });
    }
    if factors == 0 {
        let uniquenesses = s.diagonal();
        let loglik = -(n as f64) / 2.0
            * (k as f64 * LN_2PI + uniquenesses.iter().map(|&p| p.ln()).sum::<f64>() + k as f64);
        return Ok(FactorFit {
            loadings: DMatrix::zeros(k, 0),
            uniquenesses,
            loglik,
            loglik_trace: vec![loglik],
        });
    }
    if restarts == 0 {
        return Err(FactorError::Invalid {
            reason: "need at least one restart",
        });
    }
    let candidates: Vec<Option<FactorFit>> = (0..restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(master_seed, factors as u64, restart as u64);
            em_from_random_start(s, n, factors, floor, &mut rng).ok()
        })
        .collect();
    candidates
        .into_iter()
        .flatten()
        .fold(None::<FactorFit>, |best, fit| match best {
            Some(b) if b.loglik >= fit.loglik => Some(b),
            _ => Some(fit),
        })
        .ok_or(FactorError::AllRestartsFailed { factors })
}

fn em_from_random_start<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    n: u64,
    factors: usize,
    floor: f64,
    rng: &mut R,
) -> Result<FactorFit, FactorError> {
    let k = s.nrows();
    // random orthonormal columns scaled by the standard deviations, with
    // half the variance assigned to the uniquenesses
    let gaussian = DMatrix::from_fn(k, factors, |_, _| rng.sample(rand_distr::StandardNormal));
    let (q, _) = gaussian.qr().unpack();
    let mut loadings = q;
    for j in 0..k {
        let scale = (0.5 * s[(j, j)]).sqrt();
        for h in 0..factors {
            loadings[(j, h)] *= scale;
        }
    }
    let mut uniquenesses = DVector::from_fn(k, |j, _| (0.5 * s[(j, j)]).max(floor * s[(j, j)]));

    // last parameters whose log-likelihood was evaluated and accepted
    let mut accepted_loadings = loadings.clone();
    let mut accepted_uniquenesses = uniquenesses.clone();
    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..EM_MAX_ITERATIONS {
        let sigma = &loadings * loadings.transpose() + DMatrix::from_diagonal(&uniquenesses);
        let (loglik, chol) = loglik_given_sigma(s, n, &sigma)?;
        let improvement = match trace.last() {
            Some(&previous) => loglik - previous,
            None => f64::INFINITY,
        };
        if improvement < 0.0 {
            // a clamped M-step can overshoot; keep the accepted state
            break;
        }
        trace.push(loglik);
        accepted_loadings.clone_from(&loadings);
        accepted_uniquenesses.clone_from(&uniquenesses);
        if improvement < EM_TOLERANCE {
            break;
        }

        // E-step moments
        let beta = chol.solve(&loadings).transpose(); // i × k
        let cross = s * beta.transpose(); // k × i
        let ezz =
            DMatrix::identity(factors, factors) - &beta * &loadings + &beta * s * beta.transpose();
        // M-step
        let ezz_inv = Cholesky::new(ezz.clone())
            .map(|c| c.inverse())
            .or_else(|| ezz.try_inverse())
            .ok_or(FactorError::Degenerate)?;
        let new_loadings = &cross * ezz_inv;
        let new_uniquenesses = DVector::from_fn(k, |j, _| {
            let fitted: f64 = (0..factors)
                .map(|h| new_loadings[(j, h)] * cross[(j, h)])
                .sum();
            (s[(j, j)] - fitted).max(floor * s[(j, j)])
        });
        loadings = new_loadings;
        uniquenesses = new_uniquenesses;
    }

    let loglik = *trace.last().expect("the first iteration always evaluates");
    Ok(FactorFit {
        loadings: accepted_loadings,
        uniquenesses: accepted_uniquenesses,
        loglik,
        loglik_trace: trace,
    })
}

/// Fits all factor counts `0..=max_factors`.
pub fn fit_factor_profile(
    s: &DMatrix<f64>,
    n: u64,
    max_factors: usize,
    floor: f64,
    restarts: usize,
    master_seed: u64,
) -> Result<FactorProfile, FactorError> {
    let k = check_input(s, max_factors)?;
    let mut fits = Vec::with_capacity(max_factors + 1);
    for factors in 0..=max_factors {
        fits.push(fa_fit(s, n, factors, floor, restarts, master_seed)?);
    }
    Ok(FactorProfile {
        fits,
        variables: k,
        sample_count: n,
    })
}

/// Solver input for the chain `0 ⪯ 1 ⪯ 2 ⪯ 3` of factor counts on six
/// variables, using the exact coefficient table (all multiplicities 1),
/// dimensions `{6, 12, 17, 21}`, and a uniform prior.
pub fn fa_sbic_input(profile: &FactorProfile) -> Result<SbicInput, FactorError> {
    if profile.variables != 6 || profile.max_factors() > 3 {
        return Err(FactorError::TableRange {
            variables: profile.variables,
            factors: profile.max_factors(),
        });
    }
    let count = profile.fits.len();
    let poset = ModelPoset::chain(count).expect("at least the zero-factor model");
    let mut coefficients = CoefficientMatrix::new();
    let mut dims = Vec::with_capacity(count);
    for i in 0..count {
        dims.push(fa_model_dimension(6, i)?);
        for j in 0..=i {
            coefficients.insert(
                ModelId::new(i),
                ModelId::new(j),
                fa_learning_coefficient(i, j)?,
            );
        }
    }
    Ok(SbicInput::with_uniform_prior(
        poset,
        profile.logliks(),
        profile.sample_count,
        coefficients,
        dims,
    ))
}
