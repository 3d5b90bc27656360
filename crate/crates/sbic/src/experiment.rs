//! Monte Carlo harness for rank-selection frequency studies.
//!
//! Each replicate draws a fresh low-rank coefficient matrix and data set,
//! fits the full rank profile, and records the rank selected by BIC and by
//! sBIC. Replicate `r` at sample size `n` draws from the RNG stream
//! `(master_seed, n, r)`, so results are reproducible bit for bit under any
//! thread count, and adding replicates never changes existing ones.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sbic_core::solver::{solve, SolveError};

use crate::rrr::{
    fit_profile, rrr_sbic_input, simulate_coefficient_matrix, simulate_data, RrrError,
};
use crate::seed::stream_rng;

#[derive(Clone, Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {reason}")]
    Config { reason: String },
    #[error("entropy of an empty or all-zero count vector")]
    EmptyCounts,
    #[error(transparent)]
    Rrr(#[from] RrrError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}

/// Which criterion selected a rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Criterion {
    Bic,
    Sbic,
}

impl Criterion {
    pub const ALL: [Criterion; 2] = [Criterion::Bic, Criterion::Sbic];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Bic => "bic",
            Criterion::Sbic => "sbic",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Configuration of one rank-selection study.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Response dimension N.
    pub n_dim: usize,
    /// Covariate dimension M.
    pub m_dim: usize,
    /// Nonzero singular values of the true coefficient matrix,
    /// nonincreasing; their count is the true rank.
    pub singular_values: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub max_rank: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |reason: &str| {
            Err(ExperimentError::Config {
                reason: reason.to_string(),
            })
        };
        if self.replicates == 0 {
            return fail("replicates must be at least 1");
        }
        if self.sample_sizes.is_empty() {
            return fail("at least one sample size is required");
        }
        let minimum = self.m_dim.max(3);
        if self.sample_sizes.iter().any(|&n| n < minimum) {
            return fail("every sample size must be at least max(3, M)");
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.sample_sizes.iter().all(|&n| seen.insert(n)) {
            return fail("sample sizes must be distinct");
        }
        if self.max_rank > self.n_dim.min(self.m_dim) {
            return fail("max_rank cannot exceed min(N, M)");
        }
        Ok(())
    }
}

/// Selection counts per sample size, criterion, and rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionFrequencies {
    pub sample_sizes: Vec<usize>,
    pub max_rank: usize,
    pub replicates: usize,
    counts: BTreeMap<(usize, Criterion, usize), u64>,
}

impl SelectionFrequencies {
    pub fn count(&self, sample_size: usize, criterion: Criterion, rank: usize) -> u64 {
        self.counts
            .get(&(sample_size, criterion, rank))
            .copied()
            .unwrap_or(0)
    }

    /// Counts over ranks `0..=max_rank`.
    pub fn counts_for(&self, sample_size: usize, criterion: Criterion) -> Vec<u64> {
        (0..=self.max_rank)
            .map(|rank| self.count(sample_size, criterion, rank))
            .collect()
    }

    /// Most frequent rank; ties go to the smaller rank.
    pub fn modal_rank(&self, sample_size: usize, criterion: Criterion) -> usize {
        let counts = self.counts_for(sample_size, criterion);
        let mut best = 0;
        for (rank, &count) in counts.iter().enumerate() {
            if count > counts[best] {
                best = rank;
            }
        }
        best
    }

    pub fn mean_rank(&self, sample_size: usize, criterion: Criterion) -> f64 {
        let counts = self.counts_for(sample_size, criterion);
        let total: u64 = counts.iter().sum();
        counts
            .iter()
            .enumerate()
            .map(|(rank, &c)| rank as f64 * c as f64)
            .sum::<f64>()
            / total as f64
    }
}

/// First index achieving the maximum.
fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (idx, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = idx;
        }
    }
    best
}

/// Runs the full study.
pub fn run_rrr_experiment(cfg: &ExperimentConfig) -> Result<SelectionFrequencies, ExperimentError> {
    cfg.validate()?;
    let mut counts = BTreeMap::new();
    for &sample_size in &cfg.sample_sizes {
        let selections: Vec<Result<(usize, usize), ExperimentError>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|replicate| run_replicate(cfg, sample_size, replicate))
            .collect();
        for selection in selections {
            let (bic_rank, sbic_rank) = selection?;
            *counts
                .entry((sample_size, Criterion::Bic, bic_rank))
                .or_insert(0u64) += 1;
            *counts
                .entry((sample_size, Criterion::Sbic, sbic_rank))
                .or_insert(0u64) += 1;
        }
    }
    Ok(SelectionFrequencies {
        sample_sizes: cfg.sample_sizes.clone(),
        max_rank: cfg.max_rank,
        replicates: cfg.replicates,
        counts,
    })
}

fn run_replicate(
    cfg: &ExperimentConfig,
    sample_size: usize,
    replicate: usize,
) -> Result<(usize, usize), ExperimentError> {
    let mut rng = stream_rng(cfg.seed, sample_size as u64, replicate as u64);
    let pi = simulate_coefficient_matrix(cfg.n_dim, cfg.m_dim, &cfg.singular_values, &mut rng)?;
    let data = simulate_data(&pi, sample_size, &mut rng);
    let profile = fit_profile(&data, cfg.max_rank)?;
    let input = rrr_sbic_input(&profile)?;
    let result = solve(&input)?;
    Ok((argmax_first(&result.bic), argmax_first(&result.sbic)))
}

/// Entropy in nats of the relative frequencies, with `0·ln 0 = 0`.
pub fn entropy(counts: &[u64]) -> Result<f64, ExperimentError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(ExperimentError::EmptyCounts);
    }
    let value: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    Ok(value.max(0.0))
}

/// Writes the selection counts as CSV.
pub fn write_frequencies<W: Write>(
    freqs: &SelectionFrequencies,
    writer: &mut W,
) -> Result<(), ExperimentError> {
    writeln!(
        writer,
        "sample_size,criterion,rank,count,relative_frequency"
    )?;
    for &sample_size in &freqs.sample_sizes {
        for criterion in Criterion::ALL {
            for rank in 0..=freqs.max_rank {
                let count = freqs.count(sample_size, criterion, rank);
                let relative = count as f64 / freqs.replicates as f64;
                writeln!(
                    writer,
                    "{sample_size},{criterion},{rank},{count},{relative}"
                )?;
            }
        }
    }
    Ok(())
}

/// Writes the per-(sample size, criterion) selection entropies as CSV.
pub fn write_entropies<W: Write>(
    freqs: &SelectionFrequencies,
    writer: &mut W,
) -> Result<(), ExperimentError> {
    writeln!(writer, "sample_size,criterion,entropy")?;
    for &sample_size in &freqs.sample_sizes {
        for criterion in Criterion::ALL {
            let value = entropy(&freqs.counts_for(sample_size, criterion))?;
            writeln!(writer, "{sample_size},{criterion},{value}")?;
        }
    }
    Ok(())
}

/// Writes both CSV files.
pub fn emit_results(
    freqs: &SelectionFrequencies,
    frequency_path: &Path,
    entropy_path: &Path,
) -> Result<(), ExperimentError> {
    let mut frequency_file = BufWriter::new(File::create(frequency_path)?);
    write_frequencies(freqs, &mut frequency_file)?;
    frequency_file.flush()?;
    let mut entropy_file = BufWriter::new(File::create(entropy_path)?);
    write_entropies(freqs, &mut entropy_file)?;
    entropy_file.flush()?;
    Ok(())
}
