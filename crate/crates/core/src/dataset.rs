//! Point sets with optional hidden ground truth, and their CSV form.
//!
//! A dataset CSV has a header row, one column per feature, and optionally one
//! integer label column. Everything that is not the label column must parse as
//! a finite real.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{LlpError, Result};

/// `n x d` feature matrix plus optional ground-truth labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: DMatrix<f64>,
    true_labels: Option<Vec<usize>>,
    n_classes: usize,
}

impl Dataset {
    /// Validates and builds a dataset. When `n_classes` is `None` it is
    /// inferred from the labels (at least 2).
    pub fn new(
        points: DMatrix<f64>,
        true_labels: Option<Vec<usize>>,
        n_classes: Option<usize>,
    ) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(LlpError::InvalidInput(format!(
                "dataset must have n >= 1 and d >= 1, got {}x{}",
                points.nrows(),
                points.ncols()
            )));
        }
        if let Some((idx, _)) = points.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            let row = idx % points.nrows();
            return Err(LlpError::InvalidInput(format!(
                "non-finite feature value in instance {row}"
            )));
        }
        let inferred = true_labels
            .as_ref()
            .and_then(|l| l.iter().max().map(|m| m + 1))
            .unwrap_or(2)
            .max(2);
        let n_classes = n_classes.unwrap_or(inferred);
        if n_classes < 2 {
            return Err(LlpError::InvalidInput("need at least 2 classes".into()));
        }
        if let Some(labels) = &true_labels {
            if labels.len() != points.nrows() {
                return Err(LlpError::LengthMismatch {
                    expected: points.nrows(),
                    actual: labels.len(),
                });
            }
            if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
                return Err(LlpError::InvalidInput(format!(
                    "label {bad} outside 0..{n_classes}"
                )));
            }
        }
        Ok(Dataset {
            points,
            true_labels,
            n_classes,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], true_labels: Option<Vec<usize>>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(LlpError::InvalidInput("ragged rows".into()));
        }
        let points = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Dataset::new(points, true_labels, None)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn true_labels(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }

    /// Drops the ground truth. What remains is safe to hand to a solver.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            points: self.points.clone(),
            true_labels: None,
            n_classes: self.n_classes,
        }
    }

    /// Column-wise z-scoring. Constant columns are only centered.
    pub fn standardized(&self) -> Dataset {
        let mut points = self.points.clone();
        let n = points.nrows() as f64;
        for mut col in points.column_iter_mut() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for v in col.iter_mut() {
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        Dataset {
            points,
            true_labels: self.true_labels.clone(),
            n_classes: self.n_classes,
        }
    }

    /// Stacks two datasets row-wise. Labels are kept only if both have them.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.d() != other.d() {
            return Err(LlpError::LengthMismatch {
                expected: self.d(),
                actual: other.d(),
            });
        }
        let n = self.n() + other.n();
        let points = DMatrix::from_fn(n, self.d(), |i, j| {
            if i < self.n() {
                self.points[(i, j)]
            } else {
                other.points[(i - self.n(), j)]
            }
        });
        let labels = match (&self.true_labels, &other.true_labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Dataset::new(points, labels, Some(self.n_classes.max(other.n_classes)))
    }

    /// Writes `x0..x{d-1}` columns plus a `label` column when labels exist.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| LlpError::io(path, e))?;
        let mut header: Vec<String> = (0..self.d()).map(|j| format!("x{j}")).collect();
        if self.true_labels.is_some() {
            header.push("label".into());
        }
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..self.n() {
            let mut fields: Vec<String> = self.points.row(i).iter().map(|v| v.to_string()).collect();
            if let Some(labels) = &self.true_labels {
                fields.push(labels[i].to_string());
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        file.write_all(out.as_bytes())
            .map_err(|e| LlpError::io(path, e))
    }
}

/// Reads a dataset CSV. Rows are reported 1-based counting the header, so
/// the first data row is row 2.
pub fn load_dataset_csv(path: &Path, label_column: Option<&str>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => LlpError::io(path, io),
            other => LlpError::InvalidInput(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    let label_idx = match label_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            LlpError::InvalidInput(format!(
                "{}: no column named {name:?}",
                path.display()
            ))
        })?),
        None => None,
    };
    let d = headers.len() - usize::from(label_idx.is_some());
    if d == 0 {
        return Err(LlpError::InvalidInput(format!(
            "{}: no feature columns",
            path.display()
        )));
    }

    let malformed = |row: usize, message: String| LlpError::MalformedRow {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| malformed(row, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(malformed(
                row,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            if Some(j) == label_idx {
                let label: usize = field
                    .parse()
                    .map_err(|_| malformed(row, format!("label {field:?} is not a non-negative integer")))?;
                labels.push(label);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| malformed(row, format!("column {}: {field:?} is not a number", headers.get(j).unwrap_or("?"))))?;
                if !v.is_finite() {
                    return Err(malformed(row, format!("column {}: non-finite value", headers.get(j).unwrap_or("?"))));
                }
                values.push(v);
            }
        }
    }
    let n = values.len() / d;
    if n == 0 {
        return Err(LlpError::EmptyFile(path.to_path_buf()));
    }
    let points = DMatrix::from_row_slice(n, d, &values);
    Dataset::new(points, label_idx.map(|_| labels), None)
}
