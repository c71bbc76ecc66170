//! Gaussian similarity graph and its row-stochastic normalization.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{LlpError, Result};

/// `W` (symmetric, zero diagonal), its degrees, and `S = D^-1 W`.
#[derive(Debug, Clone)]
pub struct RowStochasticGraph {
    weights: DMatrix<f64>,
    degree: DVector<f64>,
    transition: DMatrix<f64>,
}

impl RowStochasticGraph {
    /// Builds the full Gaussian graph for `dataset` with bandwidth `gamma_kernel`.
    pub fn gaussian(dataset: &Dataset, gamma_kernel: f64) -> Result<Self> {
        row_normalize(compute_similarity(dataset, gamma_kernel)?)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn degree(&self) -> &DVector<f64> {
        &self.degree
    }

    /// The row-stochastic matrix `S`.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.transition
    }
}

/// `W_ij = exp(-gamma_kernel * |x_i - x_j|^2)` for `i != j`, `W_ii = 0`.
pub fn compute_similarity(dataset: &Dataset, gamma_kernel: f64) -> Result<DMatrix<f64>> {
    if !(gamma_kernel > 0.0 && gamma_kernel.is_finite()) {
        return Err(LlpError::InvalidInput(format!(
            "kernel bandwidth must be positive and finite, got {gamma_kernel}"
        )));
    }
    let x = dataset.points();
    let n = x.nrows();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = (-gamma_kernel * d2).exp();
            if !v.is_finite() {
                return Err(LlpError::NonFiniteSimilarity(i, j));
            }
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// `S = D^-1 W`. Fails on a row with zero degree; the usual remedy is a
/// smaller kernel bandwidth.
pub fn row_normalize(weights: DMatrix<f64>) -> Result<RowStochasticGraph> {
    if !weights.is_square() {
        return Err(LlpError::InvalidInput("similarity matrix must be square".into()));
    }
    let n = weights.nrows();
    let degree = DVector::from_iterator(n, weights.row_iter().map(|r| r.sum()));
    if let Some(i) = degree.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(LlpError::ZeroDegree(i));
    }
    let mut transition = weights.clone();
    for (i, mut row) in transition.row_iter_mut().enumerate() {
        row /= degree[i];
    }
    Ok(RowStochasticGraph {
        weights,
        degree,
        transition,
    })
}
