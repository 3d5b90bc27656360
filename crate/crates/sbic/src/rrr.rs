//! Reduced-rank regression.
//!
//! The model for a centered pair `(Y1, Y2)` with identity noise and
//! covariate covariance is `E[Y1 | Y2] = π Y2` with `rank(π) ≤ i`. For that
//! structure the rank-`i` maximum-likelihood estimate has a closed form:
//! with `G = Y2 Y2ᵀ`, `C = Y1 Y2ᵀ G⁻¹` (the unconstrained estimate) and
//! `R = G^{1/2}`, the minimizer of `‖Y1 − π Y2‖_F` over rank-`i` matrices is
//! `π̂_i = T_i(C R) R⁻¹`, where `T_i` truncates the SVD to the top `i`
//! singular values. Fitting all ranks at once therefore costs one SVD.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use sbic_core::coefficients::{
    rrr_learning_coefficient, rrr_model_dimension, CoefficientError, CoefficientMatrix,
};
use sbic_core::poset::{ModelId, ModelPoset};
use sbic_core::solver::SbicInput;

/// Condition-number limit on the covariate Gram matrix.
const GRAM_CONDITION_LIMIT: f64 = 1e12;
/// Eigenvalues of the Gram matrix are clamped here before inversion.
const GRAM_EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, thiserror::Error)]
pub enum RrrError {
    #[error("singular values must be positive, finite, and nonincreasing")]
    BadSingularValues,
    #[error("data contain non-finite entries")]
    NonFiniteData,
    #[error("rank {rank} exceeds min(N, M) = {max}")]
    RankTooLarge { rank: usize, max: usize },
    #[error("responses and covariates disagree on the number of observations")]
    SampleMismatch,
    #[error("need at least M = {m_dim} observations to fit, got {n}")]
    TooFewSamples { n: usize, m_dim: usize },
    #[error("covariate Gram matrix is numerically singular (condition {condition:.3e})")]
    SingularDesign { condition: f64 },
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
}

/// Observations of the regression pair, one column per observation.
#[derive(Clone, Debug)]
pub struct RrrData {
    /// Responses, `N × n`.
    pub y1: DMatrix<f64>,
    /// Covariates, `M × n`.
    pub y2: DMatrix<f64>,
}

impl RrrData {
    pub fn new(y1: DMatrix<f64>, y2: DMatrix<f64>) -> Result<Self, RrrError> {
        if y1.ncols() != y2.ncols() {
            return Err(RrrError::SampleMismatch);
        }
        if y1.iter().chain(y2.iter()).any(|v| !v.is_finite()) {
            return Err(RrrError::NonFiniteData);
        }
        Ok(RrrData { y1, y2 })
    }

    pub fn sample_count(&self) -> usize {
        self.y1.ncols()
    }

    pub fn response_dim(&self) -> usize {
        self.y1.nrows()
    }

    pub fn covariate_dim(&self) -> usize {
        self.y2.nrows()
    }
}

/// Maximum-likelihood fits for every rank `0..=max_rank`.
#[derive(Clone, Debug)]
pub struct RrrProfile {
    /// Maximized log-likelihood per rank, nondecreasing.
    pub loglik: Vec<f64>,
    /// Fitted coefficient matrix per rank.
    pub estimates: Vec<DMatrix<f64>>,
    pub n_dim: usize,
    pub m_dim: usize,
    pub sample_count: usize,
}

impl RrrProfile {
    pub fn max_rank(&self) -> usize {
        self.loglik.len() - 1
    }
}

/// Draws an `N × M` matrix with the given singular values: Haar-uniform
/// orthonormal factors around the fixed diagonal.
pub fn simulate_coefficient_matrix<R: Rng + ?Sized>(
    n_dim: usize,
    m_dim: usize,
    singular_values: &[f64],
    rng: &mut R,
) -> Result<DMatrix<f64>, RrrError> {
    let rank = singular_values.len();
    if rank > n_dim.min(m_dim) {
        return Err(RrrError::RankTooLarge {
            rank,
            max: n_dim.min(m_dim),
        });
    }
    let ordered = singular_values.windows(2).all(|w| w[0] >= w[1]);
    if !ordered || singular_values.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(RrrError::BadSingularValues);
    }
    if rank == 0 {
        return Ok(DMatrix::zeros(n_dim, m_dim));
    }
    let u = haar_orthonormal_columns(n_dim, rank, rng);
    let v = haar_orthonormal_columns(m_dim, rank, rng);
    let diag = DMatrix::from_diagonal(&DVector::from_row_slice(singular_values));
    Ok(u * diag * v.transpose())
}

/// Orthonormal columns distributed by Haar measure: QR of a standard
/// Gaussian matrix with the sign of the R diagonal folded into Q.
fn haar_orthonormal_columns<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let gaussian = DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    let (mut q, r) = gaussian.qr().unpack();
    for k in 0..cols {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Samples `n` observations: `Y2` columns standard normal, `Y1 = πY2 + ε`
/// with standard normal noise.
pub fn simulate_data<R: Rng + ?Sized>(pi: &DMatrix<f64>, n: usize, rng: &mut R) -> RrrData {
    let m_dim = pi.ncols();
    let n_dim = pi.nrows();
    let y2 = DMatrix::from_fn(m_dim, n, |_, _| rng.sample(StandardNormal));
    let noise = DMatrix::from_fn(n_dim, n, |_, _| rng.sample(StandardNormal));
    let y1 = pi * &y2 + noise;
    RrrData { y1, y2 }
}

/// Fits all ranks `0..=max_rank` by truncating the SVD of `C·R`.
///
/// The log-likelihood of rank `i` is
/// `−½‖Y1 − π̂_i Y2‖²_F − ½‖Y2‖²_F − n(N+M)/2 · ln 2π`; the constant is kept
/// so the values are interpretable on their own.
pub fn fit_profile(data: &RrrData, max_rank: usize) -> Result<RrrProfile, RrrError> {
    let n_dim = data.response_dim();
    let m_dim = data.covariate_dim();
    let n = data.sample_count();
    if max_rank > n_dim.min(m_dim) {
        return Err(RrrError::RankTooLarge {
            rank: max_rank,
            max: n_dim.min(m_dim),
        });
    }
    if n < m_dim {
        return Err(RrrError::TooFewSamples { n, m_dim });
    }

    let gram = &data.y2 * data.y2.transpose();
    let eigen = gram.symmetric_eigen();
    let mut max_ev = f64::NEG_INFINITY;
    let mut min_ev = f64::INFINITY;
    for &ev in eigen.eigenvalues.iter() {
        max_ev = max_ev.max(ev);
        min_ev = min_ev.min(ev);
    }
    let condition = if min_ev <= 0.0 {
        f64::INFINITY
    } else {
        max_ev / min_ev
    };
    if condition > GRAM_CONDITION_LIMIT {
        return Err(RrrError::SingularDesign { condition });
    }

    let basis = &eigen.eigenvectors;
    let clamped: Vec<f64> = eigen
        .eigenvalues
        .iter()
        .map(|&ev| ev.max(GRAM_EIGENVALUE_FLOOR))
        .collect();
    let scaled = |f: &dyn Fn(f64) -> f64| -> DMatrix<f64> {
        let diag = DVector::from_iterator(clamped.len(), clamped.iter().map(|&ev| f(ev)));
        basis * DMatrix::from_diagonal(&diag) * basis.transpose()
    };
    let gram_inv = scaled(&|ev| 1.0 / ev);
    let root = scaled(&|ev| ev.sqrt());
    let root_inv = scaled(&|ev| 1.0 / ev.sqrt());

    let unconstrained = (&data.y1 * data.y2.transpose()) * &gram_inv;
    let rotated = &unconstrained * &root;
    let svd = rotated.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("singular values are finite")
    });

    let constant = -(n as f64) * ((n_dim + m_dim) as f64) / 2.0 * (2.0 * std::f64::consts::PI).ln();
    let y2_energy = data.y2.norm_squared();

    let mut loglik = Vec::with_capacity(max_rank + 1);
    let mut estimates = Vec::with_capacity(max_rank + 1);
    let mut truncated = DMatrix::zeros(n_dim, m_dim);
    for rank in 0..=max_rank {
        if rank > 0 {
            let k = order[rank - 1];
            truncated += svd.singular_values[k] * u.column(k) * v_t.row(k);
        }
        let estimate = &truncated * &root_inv;
        let residual = (&data.y1 - &estimate * &data.y2).norm_squared();
        loglik.push(-0.5 * residual - 0.5 * y2_energy + constant);
        estimates.push(estimate);
    }
    Ok(RrrProfile {
        loglik,
        estimates,
        n_dim,
        m_dim,
        sample_count: n,
    })
}

/// Assembles the solver input for the rank chain `0 ⪯ 1 ⪯ … ⪯ max_rank`:
/// exact reduced-rank coefficients, dimensions `i(N+M−i)`, uniform prior.
pub fn rrr_sbic_input(profile: &RrrProfile) -> Result<SbicInput, RrrError> {
    let ranks = profile.loglik.len();
    let poset = ModelPoset::chain(ranks).expect("at least the rank-0 model");
    let mut coefficients = CoefficientMatrix::new();
    let mut dims = Vec::with_capacity(ranks);
    for i in 0..ranks {
        dims.push(rrr_model_dimension(profile.n_dim, profile.m_dim, i)?);
        for j in 0..=i {
            coefficients.insert(
                ModelId::new(i),
                ModelId::new(j),
                rrr_learning_coefficient(profile.n_dim, profile.m_dim, i, j)?,
            );
        }
    }
    Ok(SbicInput::with_uniform_prior(
        poset,
        profile.loglik.clone(),
        profile.sample_count as u64,
        coefficients,
        dims,
    ))
}
