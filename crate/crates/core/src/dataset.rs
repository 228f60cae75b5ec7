//! Loading and z-scoring of Lalonde-format observational data.
//!
//! A [`Dataset`] keeps covariates, the binary treatment indicator and the
//! real-valued outcome row-aligned, together with stable row identifiers so
//! that subsets (retain sets) can always be traced back to the source file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Column-name mapping for an input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub treatment: String,
    pub outcome: String,
    pub covariates: Vec<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            treatment: "treat".into(),
            outcome: "re78".into(),
            covariates: [
                "age", "educ", "black", "hisp", "married", "nodegr", "re74", "re75",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariate_names: Vec<String>,
    pub covariates: Matrix,
    pub treatment: Vec<u8>,
    pub outcome: Vec<f64>,
    pub row_ids: Vec<usize>,
}

impl Dataset {
    /// Assembles a dataset from in-memory parts, assigning row ids `0..n`.
    pub fn new(
        covariate_names: Vec<String>,
        covariates: Matrix,
        treatment: Vec<u8>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        let n = covariates.rows();
        let row_ids = (0..n).collect();
        let ds = Self {
            covariate_names,
            covariates,
            treatment,
            outcome,
            row_ids,
        };
        ds.check_shape()?;
        Ok(ds)
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.covariates.rows();
        for len in [self.treatment.len(), self.outcome.len(), self.row_ids.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if self.covariate_names.len() != self.covariates.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.covariates.cols(),
                actual: self.covariate_names.len(),
            });
        }
        if let Some(&bad) = self.treatment.iter().find(|&&t| t > 1) {
            return Err(Error::InvalidLabel(bad));
        }
        if !self.covariates.as_slice().iter().all(|v| v.is_finite())
            || !self.outcome.iter().all(|v| v.is_finite())
        {
            return Err(Error::NumericFailure("dataset"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.covariates.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.covariates.cols()
    }

    /// Position of each named covariate.
    pub fn covariate_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|name| {
                self.covariate_names
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))
            })
            .collect()
    }

    pub fn treated_count(&self) -> usize {
        self.treatment.iter().filter(|&&t| t == 1).count()
    }

    pub fn control_count(&self) -> usize {
        self.len() - self.treated_count()
    }

    /// Errors unless both treatment groups have at least one member.
    pub fn require_both_groups(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.treated_count() == 0 {
            return Err(Error::EmptyGroup("treated"));
        }
        if self.control_count() == 0 {
            return Err(Error::EmptyGroup("control"));
        }
        Ok(())
    }

    /// Rows at the given positions, keeping their original `row_ids`.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        Ok(Self {
            covariate_names: self.covariate_names.clone(),
            covariates: self.covariates.select_rows(positions)?,
            treatment: positions.iter().map(|&i| self.treatment[i]).collect(),
            outcome: positions.iter().map(|&i| self.outcome[i]).collect(),
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
        })
    }
}

fn parse_cell(raw: &str, row: usize, line: u64, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::NonNumeric {
        row,
        line,
        column: column.to_string(),
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            row,
            line,
            column: column.to_string(),
        });
    }
    Ok(v)
}

/// Reads a CSV file with a header row into a [`Dataset`].
///
/// Rows are kept in file order and receive ids `0..n`. Both treatment groups
/// must be present.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound {
            path: path.to_path_buf(),
        },
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    read_dataset(file, schema)
}

/// Same as [`load_dataset`] over any reader.
pub fn read_dataset<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let treat_col = find(&schema.treatment)?;
    let outcome_col = find(&schema.outcome)?;
    let cov_cols = schema
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let d = cov_cols.len();
    let mut data = Vec::new();
    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row + 1;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |col: usize| record.get(col).unwrap_or("");

        let raw_t = cell(treat_col);
        let t = match raw_t.trim().parse::<f64>() {
            Ok(0.0) => 0u8,
            Ok(1.0) => 1u8,
            _ => {
                return Err(Error::TreatmentOutOfRange {
                    row,
                    line,
                    value: raw_t.to_string(),
                })
            }
        };
        treatment.push(t);
        outcome.push(parse_cell(cell(outcome_col), row, line, &schema.outcome)?);
        for (&col, name) in cov_cols.iter().zip(&schema.covariates) {
            data.push(parse_cell(cell(col), row, line, name)?);
        }
    }
    if treatment.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let covariates = Matrix::from_vec(treatment.len(), d, data)?;
    let ds = Dataset::new(schema.covariates.clone(), covariates, treatment, outcome)?;
    ds.require_both_groups()?;
    Ok(ds)
}

/// Per-column z-scoring parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Column means and population standard deviations (divisor `n`).
pub fn fit_standardizer(x: &Matrix) -> Result<Standardizer> {
    Standardizer::fit(x)
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        Self::fit_excluding(x, &[])
    }

    /// Like [`Standardizer::fit`], but columns in `excluded` get mean 0 and
    /// std 1 so `transform` leaves them untouched.
    pub fn fit_excluding(x: &Matrix, excluded: &[usize]) -> Result<Self> {
        let n = x.rows();
        if n == 0 || x.cols() == 0 {
            return Err(Error::Empty("matrix"));
        }
        let nf = n as f64;
        let mut means = vec![0.0; x.cols()];
        let mut stds = vec![0.0; x.cols()];
        for j in 0..x.cols() {
            if excluded.contains(&j) {
                stds[j] = 1.0;
                continue;
            }
            let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / nf;
            let var = (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / nf;
            means[j] = mean;
            stds[j] = var.sqrt();
        }
        Ok(Self { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// `(x - mean) / std`, or 0 for zero-variance columns.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.cols(),
            });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = if self.stds[j] > 0.0 {
                    (*v - self.means[j]) / self.stds[j]
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    /// `z * std + mean`. Zero-variance columns map back to their mean.
    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: z.cols(),
            });
        }
        let mut out = z.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.stds[j] + self.means[j];
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`Standardizer::transform`].
pub fn transform(s: &Standardizer, x: &Matrix) -> Result<Matrix> {
    s.transform(x)
}
