//! Univariate Gaussian mixtures with unequal component variances.
//!
//! The likelihood of such a mixture is unbounded (a component variance can
//! collapse onto a data point), so fitting targets good local maxima: EM is
//! restarted from random membership assignments and component variances are
//! clamped at a floor in every M-step. The floor defaults to
//! `1e-4 ×` the sample variance, making it scale-aware.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use sbic_core::coefficients::{mixture_lambda_bound, CoefficientError, CoefficientMatrix};
use sbic_core::poset::{ModelId, ModelPoset};
use sbic_core::solver::SbicInput;

use crate::seed::stream_rng;

const EM_TOLERANCE: f64 = 1e-8;
const EM_MAX_ITERATIONS: usize = 1000;
/// A component whose total responsibility falls below this has starved.
const RESPONSIBILITY_FLOOR: f64 = 1e-10;
/// Relative factor for [`default_variance_floor`].
const DEFAULT_FLOOR_FACTOR: f64 = 1e-4;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Clone, Debug, thiserror::Error)]
pub enum MixtureError {
    #[error("component {component} lost all responsibility during EM")]
    DegenerateComponent { component: usize },
    #[error("{n} data points cannot support {components} components")]
    TooFewPoints { n: usize, components: usize },
    #[error("invalid EM setup: {reason}")]
    Invalid { reason: &'static str },
    #[error("every EM restart failed for {components} components")]
    AllRestartsFailed { components: usize },
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
}

/// One fitted mixture.
#[derive(Clone, Debug)]
pub struct MixtureFit {
    /// Mixing weights on the simplex.
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    /// Component variances, each at least the floor used in fitting.
    pub variances: Vec<f64>,
    /// Log-likelihood of the returned parameters.
    pub loglik: f64,
    /// Log-likelihood after each EM iteration; nondecreasing.
    pub loglik_trace: Vec<f64>,
}

/// Best fits for component counts `1..=max_components`.
#[derive(Clone, Debug)]
pub struct MixtureProfile {
    pub fits: Vec<MixtureFit>,
    pub sample_count: usize,
}

impl MixtureProfile {
    pub fn max_components(&self) -> usize {
        self.fits.len()
    }

    pub fn logliks(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.loglik).collect()
    }

    /// Component counts whose best log-likelihood dropped below the count
    /// before it (possible — restarts only probe local maxima).
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        (1..self.fits.len())
            .filter(|&idx| self.fits[idx].loglik < self.fits[idx - 1].loglik - EM_TOLERANCE)
            .map(|idx| idx + 1)
            .collect()
    }
}

/// `1e-4 ×` the sample variance of the data.
pub fn default_variance_floor(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let variance = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    DEFAULT_FLOOR_FACTOR * variance
}

/// Membership matrix with rows drawn uniformly from the probability simplex
/// (normalized exponential spacings).
pub fn random_membership_init<R: Rng + ?Sized>(
    n: usize,
    components: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let mut init = DMatrix::zeros(n, components);
    for t in 0..n {
        let mut total = 0.0;
        for h in 0..components {
            let gap = -(1.0 - rng.random::<f64>()).ln();
            init[(t, h)] = gap;
            total += gap;
        }
        for h in 0..components {
            init[(t, h)] = if total > 0.0 {
                init[(t, h)] / total
            } else {
                1.0 / components as f64
            };
        }
    }
    init
}

/// EM from a given membership matrix; alternates weighted-moment M-steps
/// (with the variance floor applied) and responsibility E-steps until the
/// log-likelihood improves by less than `1e-8` or 1000 iterations pass.
pub fn em_fit(
    data: &[f64],
    components: usize,
    init: &DMatrix<f64>,
    floor: f64,
) -> Result<MixtureFit, MixtureError> {
    let n = data.len();
    if components == 0 {
        return Err(MixtureError::Invalid {
            reason: "at least one component is required",
        });
    }
    if n < components {
        return Err(MixtureError::TooFewPoints { n, components });
    }
    if !(floor.is_finite() && floor > 0.0) {
        return Err(MixtureError::Invalid {
            reason: "variance floor must be positive and finite",
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(MixtureError::Invalid {
            reason: "data contain non-finite entries",
        });
    }
    if init.nrows() != n || init.ncols() != components {
        return Err(MixtureError::Invalid {
            reason: "membership matrix shape does not match data/components",
        });
    }
    for t in 0..n {
        let row_sum: f64 = (0..components).map(|h| init[(t, h)]).sum();
        if (row_sum - 1.0).abs() > 1e-6 || (0..components).any(|h| init[(t, h)] < 0.0) {
            return Err(MixtureError::Invalid {
                reason: "membership rows must lie on the probability simplex",
            });
        }
    }

    let mut responsibilities = init.clone();
    let mut weights = vec![0.0; components];
    let mut means = vec![0.0; components];
    let mut variances = vec![0.0; components];
    // last parameters whose log-likelihood was evaluated and accepted
    let mut accepted = (weights.clone(), means.clone(), variances.clone());
    let mut trace = Vec::new();

    for _ in 0..EM_MAX_ITERATIONS {
        // M-step: weighted moments under the current responsibilities.
        for h in 0..components {
            let total: f64 = (0..n).map(|t| responsibilities[(t, h)]).sum();
            if total < RESPONSIBILITY_FLOOR {
                return Err(MixtureError::DegenerateComponent { component: h });
            }
            let mean = (0..n)
                .map(|t| responsibilities[(t, h)] * data[t])
                .sum::<f64>()
                / total;
            let variance = (0..n)
                .map(|t| responsibilities[(t, h)] * (data[t] - mean) * (data[t] - mean))
                .sum::<f64>()
                / total;
            weights[h] = total / n as f64;
            means[h] = mean;
            variances[h] = variance.max(floor);
        }

        // E-step: responsibilities and the log-likelihood of the new
        // parameters, in log scale per observation.
        let mut loglik = 0.0;
        let mut log_terms = vec![0.0; components];
        for t in 0..n {
            for h in 0..components {
                let centered = data[t] - means[h];
                log_terms[h] = weights[h].ln()
                    - 0.5 * (LN_2PI + variances[h].ln())
                    - centered * centered / (2.0 * variances[h]);
            }
            let shift = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = log_terms.iter().map(|&lt| (lt - shift).exp()).sum();
            let log_density = shift + total.ln();
            for h in 0..components {
                responsibilities[(t, h)] = (log_terms[h] - shift).exp() / total;
            }
            loglik += log_density;
        }

        let improvement = match trace.last() {
            Some(&previous) => loglik - previous,
            None => f64::INFINITY,
        };
        if improvement < 0.0 {
            // the variance clamp can overshoot; keep the accepted state
            break;
        }
        trace.push(loglik);
        accepted = (weights.clone(), means.clone(), variances.clone());
        if improvement < EM_TOLERANCE {
            break;
        }
    }

    let loglik = *trace.last().expect("the first iteration always evaluates");
    let (weights, means, variances) = accepted;
    Ok(MixtureFit {
        weights,
        means,
        variances,
        loglik,
        loglik_trace: trace,
    })
}

impl MixtureFit {
    /// Number of component variances sitting on the floor. Such components
    /// are boundary artifacts of the clamp, not part of a local maximum of
    /// the (unbounded) likelihood.
    pub fn pinned_components(&self, floor: f64) -> usize {
        self.variances
            .iter()
            .filter(|&&v| v <= floor * (1.0 + 1e-9))
            .count()
    }

    /// Whether some component variance sits on the floor.
    pub fn is_floor_pinned(&self, floor: f64) -> bool {
        self.pinned_components(floor) > 0
    }
}

/// Best-of-restarts EM for every component count `1..=max_components`.
///
/// Restart `r` for count `c` draws from the stream `(master_seed, c, r)`,
/// so the outcome does not depend on the parallel schedule. Restarts that
/// starve a component are skipped, and restarts whose variances end up
/// pinned at the floor only count when no restart converged to an interior
/// local maximum; a count where every restart fails outright is an error.
pub fn fit_mixture_profile(
    data: &[f64],
    max_components: usize,
    restarts: usize,
    floor: f64,
    master_seed: u64,
) -> Result<MixtureProfile, MixtureError> {
    if max_components == 0 || restarts == 0 {
        return Err(MixtureError::Invalid {
            reason: "need at least one component count and one restart",
        });
    }
    if data.len() < max_components {
        return Err(MixtureError::TooFewPoints {
            n: data.len(),
            components: max_components,
        });
    }
    let mut fits = Vec::with_capacity(max_components);
    for components in 1..=max_components {
        let candidates: Vec<Option<MixtureFit>> = (0..restarts)
            .into_par_iter()
            .map(|restart| {
                let mut rng = stream_rng(master_seed, components as u64, restart as u64);
                let init = random_membership_init(data.len(), components, &mut rng);
                em_fit(data, components, &init, floor).ok()
            })
            .collect();
        // prefer interior local maxima; among degenerate ones, the least
        // pinned (and only then the most likely) misrepresents the data
        // least
        let best = candidates
            .iter()
            .flatten()
            .fold(None::<&MixtureFit>, |best, fit| match best {
                None => Some(fit),
                Some(b) => {
                    let incumbent = (b.pinned_components(floor), -b.loglik);
                    let challenger = (fit.pinned_components(floor), -fit.loglik);
                    if challenger < incumbent {
                        Some(fit)
                    } else {
                        Some(b)
                    }
                }
            })
            .cloned();
        fits.push(best.ok_or(MixtureError::AllRestartsFailed { components })?);
    }
    Ok(MixtureProfile {
        fits,
        sample_count: data.len(),
    })
}

/// Solver input for the chain `1 ⪯ 2 ⪯ … ⪯ K` of component counts: λ from
/// the mixture bound, dimensions `3c − 1`, uniform prior. Model index `c−1`
/// holds the `c`-component model.
pub fn mixture_sbic_input(profile: &MixtureProfile) -> Result<SbicInput, MixtureError> {
    let k = profile.fits.len();
    let poset = ModelPoset::chain(k).expect("at least one component count");
    let mut coefficients = CoefficientMatrix::new();
    let mut dims = Vec::with_capacity(k);
    for c_model in 1..=k {
        dims.push(3 * c_model - 1);
        for c_true in 1..=c_model {
            coefficients.insert(
                ModelId::new(c_model - 1),
                ModelId::new(c_true - 1),
                mixture_lambda_bound(c_model, c_true)?,
            );
        }
    }
    Ok(SbicInput::with_uniform_prior(
        poset,
        profile.logliks(),
        profile.sample_count as u64,
        coefficients,
        dims,
    ))
}

const GALAXIES_KM_S: &str = include_str!("../data/galaxies.txt");

/// The 82 galaxy velocities, in units of 1000 km/s (the file stores km/s).
pub fn galaxies_dataset() -> Vec<f64> {
    GALAXIES_KM_S
        .split_whitespace()
        .map(|token| {
            token
                .parse::<f64>()
                .expect("bundled galaxies data is numeric")
                / 1000.0
        })
        .collect()
}
