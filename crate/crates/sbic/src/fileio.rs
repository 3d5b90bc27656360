//! File formats: the model-collection JSON document, numeric data
//! ingestion, and the score-table writers.
//!
//! A model collection is a JSON object with keys
//!
//! * `models`: list of `{id, loglik, dim, prior?}` (prior weights need not
//!   be normalized; missing means uniform),
//! * `order`: list of `[child, parent]` cover pairs (the poset is their
//!   reflexive-transitive closure),
//! * `n`: sample size,
//! * `coefficients`: list of `{i, j, lambda, m}` with `lambda` a rational
//!   literal `"p/q"` or `"p"`, one entry per pair `j ⪯ i`.
//!
//! Numbers in emitted JSON and CSV are rounded to 12 significant digits so
//! identical invocations produce byte-identical output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::json;

use sbic_core::coefficients::{CoefficientMatrix, LearningCoefficient};
use sbic_core::poset::{ModelId, ModelPoset, PosetError};
use sbic_core::rational::Rational;
use sbic_core::solver::{SbicInput, SbicResult};

use crate::rrr::RrrData;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn io_error(path: &Path, err: impl std::fmt::Display) -> FileError {
    FileError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Model-collection JSON
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCollectionFile {
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub order: Vec<(String, String)>,
    pub n: u64,
    pub coefficients: Vec<CoefficientEntry>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub id: String,
    pub loglik: f64,
    pub dim: usize,
    #[serde(default)]
    pub prior: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    /// Model id.
    pub i: String,
    /// Submodel id.
    pub j: String,
    /// Rational literal, e.g. `"9/2"` or `"3"`.
    pub lambda: String,
    pub m: u32,
}

pub fn parse_model_collection(text: &str) -> Result<ModelCollectionFile, FileError> {
    serde_json::from_str(text).map_err(|e| FileError::Schema(e.to_string()))
}

pub fn read_model_collection(path: &Path) -> Result<ModelCollectionFile, FileError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_model_collection(&text)
}

/// Turns the parsed document into a solver input plus the id labels in file
/// order. Structural problems (unknown or duplicate ids, malformed
/// rationals) are schema errors; cycles and bad coefficient values are
/// validation errors.
pub fn build_input(file: &ModelCollectionFile) -> Result<(SbicInput, Vec<String>), FileError> {
    if file.models.is_empty() {
        return Err(FileError::Schema("`models` must not be empty".into()));
    }
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut labels = Vec::with_capacity(file.models.len());
    for (position, entry) in file.models.iter().enumerate() {
        if index.insert(entry.id.as_str(), position).is_some() {
            return Err(FileError::Schema(format!(
                "duplicate model id `{}`",
                entry.id
            )));
        }
        labels.push(entry.id.clone());
    }
    let resolve = |id: &str, context: &str| -> Result<ModelId, FileError> {
        index
            .get(id)
            .map(|&position| ModelId::new(position))
            .ok_or_else(|| {
                FileError::Schema(format!("{context} references unknown model id `{id}`"))
            })
    };

    let mut covers = Vec::with_capacity(file.order.len());
    for (child, parent) in &file.order {
        covers.push((resolve(child, "`order`")?, resolve(parent, "`order`")?));
    }
    let poset = match ModelPoset::build(file.models.len(), &covers) {
        Ok(poset) => poset,
        Err(e @ PosetError::Cycle(_, _)) => return Err(FileError::Validation(e.to_string())),
        Err(e) => return Err(FileError::Schema(e.to_string())),
    };

    let mut coefficients = CoefficientMatrix::new();
    for entry in &file.coefficients {
        let model = resolve(&entry.i, "`coefficients`")?;
        let submodel = resolve(&entry.j, "`coefficients`")?;
        let lambda: Rational = entry.lambda.parse().map_err(|e| {
            FileError::Schema(format!(
                "coefficient (i=`{}`, j=`{}`): {e}",
                entry.i, entry.j
            ))
        })?;
        let coefficient = LearningCoefficient::new(lambda, entry.m)
            .map_err(|e| FileError::Validation(e.to_string()))?;
        if coefficients.insert(model, submodel, coefficient).is_some() {
            return Err(FileError::Schema(format!(
                "duplicate coefficient entry (i=`{}`, j=`{}`)",
                entry.i, entry.j
            )));
        }
    }

    let loglik = file.models.iter().map(|m| m.loglik).collect();
    let prior = file.models.iter().map(|m| m.prior.unwrap_or(1.0)).collect();
    let dims = file.models.iter().map(|m| m.dim).collect();
    Ok((
        SbicInput {
            poset,
            loglik,
            n: file.n,
            coefficients,
            prior,
            dims,
        },
        labels,
    ))
}

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Rounds to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Shortest decimal form of the 12-significant-digit rounding.
pub fn fmt_f64(x: f64) -> String {
    format!("{}", round_sig12(x))
}

// ---------------------------------------------------------------------------
// Score tables
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SolveRow {
    pub id: String,
    pub loglik: f64,
    pub bic: f64,
    pub sbic: f64,
    pub penalty: f64,
    pub posterior_bic: f64,
    pub posterior_sbic: f64,
}

/// Ids of the models maximizing each criterion (ties toward the earlier
/// model).
#[derive(Clone, Debug)]
pub struct SelectionSummary {
    pub bic: String,
    pub sbic: String,
}

pub fn solve_table(labels: &[String], input: &SbicInput, result: &SbicResult) -> Vec<SolveRow> {
    labels
        .iter()
        .enumerate()
        .map(|(idx, id)| SolveRow {
            id: id.clone(),
            loglik: input.loglik[idx],
            bic: result.bic[idx],
            sbic: result.sbic[idx],
            penalty: result.penalty[idx],
            posterior_bic: result.posterior_bic[idx],
            posterior_sbic: result.posterior_sbic[idx],
        })
        .collect()
}

pub fn selected_labels(labels: &[String], result: &SbicResult) -> SelectionSummary {
    let argmax = |scores: &[f64]| {
        let mut best = 0;
        for (idx, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = idx;
            }
        }
        best
    };
    SelectionSummary {
        bic: labels[argmax(&result.bic)].clone(),
        sbic: labels[argmax(&result.sbic)].clone(),
    }
}

pub fn write_table_csv<W: Write>(
    rows: &[SolveRow],
    selected: Option<&SelectionSummary>,
    writer: &mut W,
) -> std::io::Result<()> {
    writeln!(
        writer,
        "id,loglik,bic,sbic,penalty,posterior_bic,posterior_sbic"
    )?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            row.id,
            fmt_f64(row.loglik),
            fmt_f64(row.bic),
            fmt_f64(row.sbic),
            fmt_f64(row.penalty),
            fmt_f64(row.posterior_bic),
            fmt_f64(row.posterior_sbic)
        )?;
    }
    if let Some(selected) = selected {
        writeln!(
            writer,
            "# selected: bic={} sbic={}",
            selected.bic, selected.sbic
        )?;
    }
    Ok(())
}

pub fn write_table_json<W: Write>(
    rows: &[SolveRow],
    n: u64,
    selected: Option<&SelectionSummary>,
    writer: &mut W,
) -> std::io::Result<()> {
    let number = |x: f64| serde_json::Number::from_f64(round_sig12(x)).expect("scores are finite");
    let models: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            json!({
                "id": row.id,
                "loglik": number(row.loglik),
                "bic": number(row.bic),
                "sbic": number(row.sbic),
                "penalty": number(row.penalty),
                "posterior_bic": number(row.posterior_bic),
                "posterior_sbic": number(row.posterior_sbic),
            })
        })
        .collect();
    let mut document = json!({ "n": n, "models": models });
    if let Some(selected) = selected {
        document["selected"] = json!({ "bic": selected.bic, "sbic": selected.sbic });
    }
    writeln!(writer, "{}", serde_json::to_string_pretty(&document)?)
}

// ---------------------------------------------------------------------------
// Numeric data ingestion
// ---------------------------------------------------------------------------

/// A parsed numeric table: column names when the file had a header row, and
/// the data rows.
pub struct NumericTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a CSV file of numbers; a first row that fails to parse as numbers
/// is taken as the header.
pub fn read_numeric_table(path: &Path) -> Result<NumericTable, FileError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                io_error(path, e)
            } else {
                // ragged records and other format defects
                FileError::Schema(format!("{}: {e}", path.display()))
            }
        })?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => {
                header = Some(record.iter().map(str::to_string).collect());
            }
            Err(_) => {
                return Err(FileError::Schema(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    line + 1
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(FileError::Schema(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(FileError::Schema(format!(
            "{}: rows have inconsistent widths",
            path.display()
        )));
    }
    Ok(NumericTable { header, rows })
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c])
}

/// Observation matrix (rows = cases) from a CSV file.
pub fn read_observation_matrix(path: &Path) -> Result<DMatrix<f64>, FileError> {
    Ok(to_matrix(&read_numeric_table(path)?.rows))
}

/// Square covariance matrix from a CSV file.
pub fn read_covariance(path: &Path) -> Result<DMatrix<f64>, FileError> {
    let matrix = read_observation_matrix(path)?;
    if matrix.nrows() != matrix.ncols() {
        return Err(FileError::Schema(format!(
            "{}: covariance matrix must be square, got {}×{}",
            path.display(),
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    Ok(matrix)
}

/// Regression data from two files (responses, covariates), rows =
/// observations.
pub fn read_rrr_pair(y1_path: &Path, y2_path: &Path) -> Result<RrrData, FileError> {
    let y1 = read_observation_matrix(y1_path)?;
    let y2 = read_observation_matrix(y2_path)?;
    if y1.nrows() != y2.nrows() {
        return Err(FileError::Schema(format!(
            "{} and {} disagree on the number of observations",
            y1_path.display(),
            y2_path.display()
        )));
    }
    RrrData::new(y1.transpose(), y2.transpose()).map_err(|e| FileError::Validation(e.to_string()))
}

/// Regression data from one file whose header carries `y1_`/`y2_` column
/// prefixes; rows = observations.
pub fn read_rrr_single(path: &Path) -> Result<RrrData, FileError> {
    let table = read_numeric_table(path)?;
    let Some(header) = table.header else {
        return Err(FileError::Schema(format!(
            "{}: a header with y1_/y2_ column prefixes is required",
            path.display()
        )));
    };
    let mut response_columns = Vec::new();
    let mut covariate_columns = Vec::new();
    for (column, name) in header.iter().enumerate() {
        if name.starts_with("y1_") {
            response_columns.push(column);
        } else if name.starts_with("y2_") {
            covariate_columns.push(column);
        } else {
            return Err(FileError::Schema(format!(
                "{}: unexpected column `{name}` (want y1_/y2_ prefixes)",
                path.display()
            )));
        }
    }
    if response_columns.is_empty() || covariate_columns.is_empty() {
        return Err(FileError::Schema(format!(
            "{}: need at least one y1_ and one y2_ column",
            path.display()
        )));
    }
    let n = table.rows.len();
    let pick =
        |columns: &[usize]| DMatrix::from_fn(columns.len(), n, |r, c| table.rows[c][columns[r]]);
    RrrData::new(pick(&response_columns), pick(&covariate_columns))
        .map_err(|e| FileError::Validation(e.to_string()))
}

/// A series of reals from a single-column CSV or whitespace-separated text;
/// an unparseable first line is skipped as a header.
pub fn read_scalar_series(path: &Path) -> Result<Vec<f64>, FileError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut values = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = tokens.iter().map(|t| t.parse::<f64>()).collect();
        match parsed {
            Ok(mut row) => values.append(&mut row),
            Err(_) if index == 0 => {} // header
            Err(_) => {
                return Err(FileError::Schema(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    index + 1
                )));
            }
        }
    }
    if values.is_empty() {
        return Err(FileError::Schema(format!(
            "{}: no numeric values",
            path.display()
        )));
    }
    Ok(values)
}
