//! Learning coefficients `(λ, m)` and coefficient tables over a model poset.
//!
//! For a model `M_i` and a submodel `M_j ⪯ M_i`, the pair `(λ_ij, m_ij)`
//! governs the `n^{−λ} (log n)^{m−1}` factor of the marginal likelihood of
//! `M_i` when the data come from `M_j`. Exact values are supplied here for
//! reduced-rank regression and a six-variable factor-analysis table, and an
//! upper bound is supplied for univariate Gaussian mixtures with unequal
//! variances. All values are exact rationals; `λ ∈ [0, d_i/2]` and
//! `m ∈ {1, …, d_i}` for a model of dimension `d_i`.

use alloc::vec::Vec;
use core::fmt;

use alloc::collections::BTreeMap;

use crate::poset::{ModelId, ModelPoset};
use crate::rational::Rational;

/// A learning coefficient with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LearningCoefficient {
    lambda: Rational,
    multiplicity: u32,
}

impl LearningCoefficient {
    /// Requires `lambda ≥ 0` and `multiplicity ≥ 1`.
    pub fn new(lambda: Rational, multiplicity: u32) -> Result<Self, CoefficientError> {
        if lambda.is_negative() || multiplicity == 0 {
            return Err(CoefficientError::Invalid {
                lambda,
                multiplicity,
            });
        }
        Ok(LearningCoefficient {
            lambda,
            multiplicity,
        })
    }

    pub fn lambda(&self) -> Rational {
        self.lambda
    }

    pub fn multiplicity(&self) -> u32 {
        self.multiplicity
    }
}

impl fmt::Display for LearningCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(λ={}, m={})", self.lambda, self.multiplicity)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CoefficientError {
    #[error(
        "reduced-rank ranks must satisfy 0 <= true rank {true_rank} <= rank {rank} <= min(N, M) = {max} with N, M >= 1"
    )]
    RankRange {
        rank: usize,
        true_rank: usize,
        max: usize,
    },
    #[error(
        "factor-analysis table covers 0 <= true factors {true_factors} <= factors {factors} <= 3"
    )]
    FactorRange { factors: usize, true_factors: usize },
    #[error("factor model with {factors} factors on {variables} variables is overparametrized")]
    FactorDimension { variables: usize, factors: usize },
    #[error(
        "mixture bound needs 1 <= true components {true_components} <= components {components}"
    )]
    MixtureRange {
        components: usize,
        true_components: usize,
    },
    #[error("learning coefficient needs λ >= 0 and m >= 1, got λ={lambda}, m={multiplicity}")]
    Invalid { lambda: Rational, multiplicity: u32 },
}

/// Learning coefficient for reduced-rank regression of an `N×M` coefficient
/// matrix: model rank `rank`, true rank `true_rank`.
///
/// Writing `H` for the model rank and `r` for the true rank, the exact value
/// is piecewise:
///
/// * `M + H ≤ N + r`:   `λ = (HM + r(N − H))/2`, `m = 1`;
/// * `N + H ≤ M + r`:   `λ = (HN + r(M − H))/2`, `m = 1`;
/// * otherwise, with `s = M + N + H + r`:
///   `λ = (2(H+r)(M+N) − (M−N)² − (H+r)²)/8` and `m = 1` when `s` is even,
///   the same numerator plus one eighth and `m = 2` when `s` is odd.
///
/// On the case boundaries the linear cases apply (and agree with the
/// quadratic one on λ).
pub fn rrr_learning_coefficient(
    n_dim: usize,
    m_dim: usize,
    rank: usize,
    true_rank: usize,
) -> Result<LearningCoefficient, CoefficientError> {
    let max = n_dim.min(m_dim);
    if n_dim == 0 || m_dim == 0 || true_rank > rank || rank > max {
        return Err(CoefficientError::RankRange {
            rank,
            true_rank,
            max,
        });
    }
    let (n, m, h, r) = (n_dim as i64, m_dim as i64, rank as i64, true_rank as i64);
    if m + h <= n + r {
        LearningCoefficient::new(Rational::new(h * m + r * (n - h), 2), 1)
    } else if n + h <= m + r {
        LearningCoefficient::new(Rational::new(h * n + r * (m - h), 2), 1)
    } else {
        let base = 2 * (h + r) * (m + n) - (m - n) * (m - n) - (h + r) * (h + r);
        if (m + n + h + r) % 2 == 0 {
            LearningCoefficient::new(Rational::new(base, 8), 1)
        } else {
            LearningCoefficient::new(Rational::new(base + 1, 8), 2)
        }
    }
}

/// Dimension `rank·(N + M − rank)` of the set of `N×M` matrices of rank at
/// most `rank`.
pub fn rrr_model_dimension(
    n_dim: usize,
    m_dim: usize,
    rank: usize,
) -> Result<usize, CoefficientError> {
    let max = n_dim.min(m_dim);
    if n_dim == 0 || m_dim == 0 || rank > max {
        return Err(CoefficientError::RankRange {
            rank,
            true_rank: 0,
            max,
        });
    }
    Ok(rank * (n_dim + m_dim - rank))
}

// λ table for factor analysis with six observed variables and 0..=3 factors,
// multiplicity 1 throughout; the contribution of the six means is excluded.
const FA_LAMBDA_TABLE: [&[(i64, i64)]; 4] = [
    &[(3, 1)],
    &[(9, 2), (6, 1)],
    &[(6, 1), (29, 4), (17, 2)],
    &[(15, 2), (17, 2), (19, 2), (21, 2)],
];

/// Learning coefficient for factor analysis with six observed variables:
/// model with `factors` factors, data from a model with `true_factors`.
pub fn fa_learning_coefficient(
    factors: usize,
    true_factors: usize,
) -> Result<LearningCoefficient, CoefficientError> {
    if true_factors > factors || factors > 3 {
        return Err(CoefficientError::FactorRange {
            factors,
            true_factors,
        });
    }
    let (num, den) = FA_LAMBDA_TABLE[factors][true_factors];
    LearningCoefficient::new(Rational::new(num, den), 1)
}

/// Dimension `k(i+1) − i(i−1)/2` of the factor model with `factors` factors
/// on `variables` observed variables (loadings modulo rotation plus
/// uniquenesses; means excluded).
pub fn fa_model_dimension(variables: usize, factors: usize) -> Result<usize, CoefficientError> {
    let correction = factors * factors.saturating_sub(1) / 2;
    if variables == 0 || correction > variables * (factors + 1) {
        return Err(CoefficientError::FactorDimension { variables, factors });
    }
    Ok(variables * (factors + 1) - correction)
}

/// Upper bound on the learning coefficient of a univariate Gaussian mixture
/// with `components` components and unequal variances, when the data come
/// from a mixture with `true_components` components:
/// `λ ≤ min(((i−1) + 2j)/2, (3i−1)/2)`, used as a plug-in value with
/// multiplicity 1. At `j = i` the bound equals `dim/2 = (3i−1)/2`.
pub fn mixture_lambda_bound(
    components: usize,
    true_components: usize,
) -> Result<LearningCoefficient, CoefficientError> {
    if true_components < 1 || true_components > components {
        return Err(CoefficientError::MixtureRange {
            components,
            true_components,
        });
    }
    let (i, j) = (components as i64, true_components as i64);
    let bound = Rational::new((i - 1) + 2 * j, 2);
    let half_dim = Rational::new(3 * i - 1, 2);
    LearningCoefficient::new(bound.min(half_dim), 1)
}

/// Coefficient table over a poset: one entry per pair `j ⪯ i`, keyed as
/// `(model, submodel)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoefficientMatrix {
    entries: BTreeMap<(ModelId, ModelId), LearningCoefficient>,
}

impl CoefficientMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts the coefficient for `(model, submodel)`, returning any
    /// previous entry.
    pub fn insert(
        &mut self,
        model: ModelId,
        submodel: ModelId,
        coefficient: LearningCoefficient,
    ) -> Option<LearningCoefficient> {
        self.entries.insert((model, submodel), coefficient)
    }

    pub fn get(&self, model: ModelId, submodel: ModelId) -> Option<LearningCoefficient> {
        self.entries.get(&(model, submodel)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModelId, ModelId, LearningCoefficient)> + '_ {
        self.entries.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("dims has {got} entries for {expected} models")]
    DimensionCount { expected: usize, got: usize },
    #[error("missing coefficient entry (i={model}, j={submodel})")]
    MissingEntry { model: ModelId, submodel: ModelId },
    #[error("coefficient entry (i={model}, j={submodel}) does not correspond to a pair j ⪯ i")]
    ExtraEntry { model: ModelId, submodel: ModelId },
    #[error("λ = {lambda} at (i={model}, j={submodel}) outside [0, d/2] = [0, {half_dim}]")]
    LambdaOutOfRange {
        model: ModelId,
        submodel: ModelId,
        lambda: Rational,
        half_dim: Rational,
    },
    #[error(
        "multiplicity m = {multiplicity} at (i={model}, j={submodel}) outside {{1, …, {max}}}"
    )]
    MultiplicityOutOfRange {
        model: ModelId,
        submodel: ModelId,
        multiplicity: u32,
        max: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationWarning {
    /// `λ_ij > λ_ii`: the diagonal should dominate its row.
    DiagonalNotMaximal { model: ModelId, submodel: ModelId },
    /// `λ_ij > λ_il` for `j ⪯ l`: λ should be nondecreasing in the submodel.
    NotMonotone {
        model: ModelId,
        smaller: ModelId,
        larger: ModelId,
    },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::DiagonalNotMaximal { model, submodel } => write!(
                f,
                "λ at (i={model}, j={submodel}) exceeds the diagonal λ at (i={model}, j={model})"
            ),
            ValidationWarning::NotMonotone {
                model,
                smaller,
                larger,
            } => write!(
                f,
                "λ at (i={model}, j={smaller}) exceeds λ at (i={model}, j={larger}) although {smaller} ⪯ {larger}"
            ),
        }
    }
}

/// Outcome of [`validate_matrix`]: hard errors plus monotonicity warnings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
    pub warnings: Vec<ValidationWarning>,
}

impl ValidationReport {
    /// No errors (warnings are allowed).
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} error(s), {} warning(s)",
            self.errors.len(),
            self.warnings.len()
        )?;
        for e in &self.errors {
            write!(f, "; {e}")?;
        }
        for w in &self.warnings {
            write!(f, "; warning: {w}")?;
        }
        Ok(())
    }
}

/// Checks a coefficient table against a poset and per-model dimensions.
///
/// Errors: missing or extra entries, `λ ∉ [0, d_i/2]`, `m ∉ {1, …, d_i}`
/// (for a zero-dimensional model `m = 1` is accepted). Warnings: violations
/// of row monotonicity (`λ` nondecreasing along `⪯`, diagonal maximal).
pub fn validate_matrix(
    poset: &ModelPoset,
    matrix: &CoefficientMatrix,
    dims: &[usize],
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if dims.len() != poset.len() {
        report.errors.push(ValidationError::DimensionCount {
            expected: poset.len(),
            got: dims.len(),
        });
        return report;
    }
    for (model, submodel, _) in matrix.iter() {
        if !poset.leq(submodel, model) {
            report
                .errors
                .push(ValidationError::ExtraEntry { model, submodel });
        }
    }
    for i in poset.ids() {
        let half_dim = Rational::new(dims[i.index()] as i64, 2);
        let max_multiplicity = (dims[i.index()] as u32).max(1);
        let down = poset.down_set(i).expect("id comes from the poset");
        for &j in &down {
            let Some(coefficient) = matrix.get(i, j) else {
                report.errors.push(ValidationError::MissingEntry {
                    model: i,
                    submodel: j,
                });
                continue;
            };
            if coefficient.lambda() > half_dim {
                report.errors.push(ValidationError::LambdaOutOfRange {
                    model: i,
                    submodel: j,
                    lambda: coefficient.lambda(),
                    half_dim,
                });
            }
            if coefficient.multiplicity() > max_multiplicity {
                report.errors.push(ValidationError::MultiplicityOutOfRange {
                    model: i,
                    submodel: j,
                    multiplicity: coefficient.multiplicity(),
                    max: max_multiplicity,
                });
            }
        }
        // Monotonicity along the row, where entries exist.
        let Some(diagonal) = matrix.get(i, i) else {
            continue;
        };
        for &j in &down {
            let Some(coefficient) = matrix.get(i, j) else {
                continue;
            };
            if coefficient.lambda() > diagonal.lambda() {
                report.warnings.push(ValidationWarning::DiagonalNotMaximal {
                    model: i,
                    submodel: j,
                });
            }
            for &l in &down {
                if l == j || l == i || !poset.leq(j, l) {
                    continue;
                }
                if let Some(larger) = matrix.get(i, l) {
                    if coefficient.lambda() > larger.lambda() {
                        report.warnings.push(ValidationWarning::NotMonotone {
                            model: i,
                            smaller: j,
                            larger: l,
                        });
                    }
                }
            }
        }
    }
    report
}
