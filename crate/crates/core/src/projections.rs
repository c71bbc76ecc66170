//! Euclidean projections onto the bag-mass affine set, the unit box and the
//! row simplex, plus the alternating-projections loop over their intersection.
//!
//! The loop always applies the mass projection first and the box (or simplex)
//! projection second, so every returned iterate satisfies the box/simplex
//! constraint exactly and the reported residual is the remaining bag-mass
//! violation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bags::BagConstraintSystem;
use crate::error::{LlpError, Result, Stage};

/// Binary soft labels: one positive-class score per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SoftLabelVector(pub Vec<f64>);

/// Multiclass soft labels: one row per instance, one column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix(pub DMatrix<f64>);

impl SoftLabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl SoftLabelMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.0.ncols()
    }
}

/// Soft labels that can be pushed onto `{A f = b}` and onto their per-instance
/// domain (the box for vectors, the simplex for matrix rows).
pub trait Projectable: Clone {
    fn project_mass(&mut self, bags: &BagConstraintSystem);
    fn project_domain(&mut self);
    /// Largest absolute deviation of any bag/class sum from its target.
    fn mass_violation(&self, bags: &BagConstraintSystem) -> f64;
    /// Largest distance of any coordinate (or row sum) from the domain.
    fn domain_violation(&self) -> f64;
    /// Largest absolute coordinate difference.
    fn max_abs_diff(&self, other: &Self) -> f64;

    fn residual(&self, bags: &BagConstraintSystem) -> f64 {
        self.mass_violation(bags).max(self.domain_violation())
    }
}

impl Projectable for SoftLabelVector {
    fn project_mass(&mut self, bags: &BagConstraintSystem) {
        let target = bags.class_mass();
        for (k, members) in bags.bags().enumerate() {
            let sum: f64 = members.iter().map(|&i| self.0[i]).sum();
            let shift = (target[(k, 1)] - sum) / members.len() as f64;
            for &i in members {
                self.0[i] += shift;
            }
        }
    }

    fn project_domain(&mut self) {
        for v in self.0.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }

    fn mass_violation(&self, bags: &BagConstraintSystem) -> f64 {
        let target = bags.class_mass();
        bags.apply(&self.0)
            .iter()
            .enumerate()
            .map(|(k, s)| (s - target[(k, 1)]).abs())
            .fold(0.0, f64::max)
    }

    fn domain_violation(&self) -> f64 {
        self.0
            .iter()
            .map(|&v| (-v).max(v - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Projectable for SoftLabelMatrix {
    fn project_mass(&mut self, bags: &BagConstraintSystem) {
        let target = bags.class_mass();
        for (k, members) in bags.bags().enumerate() {
            for h in 0..self.0.ncols() {
                let sum: f64 = members.iter().map(|&i| self.0[(i, h)]).sum();
                let shift = (target[(k, h)] - sum) / members.len() as f64;
                for &i in members {
                    self.0[(i, h)] += shift;
                }
            }
        }
    }

    fn project_domain(&mut self) {
        for mut row in self.0.row_iter_mut() {
            let mut values: Vec<f64> = row.iter().copied().collect();
            project_simplex_in_place(&mut values);
            for (dst, v) in row.iter_mut().zip(values) {
                *dst = v;
            }
        }
    }

    fn mass_violation(&self, bags: &BagConstraintSystem) -> f64 {
        let target = bags.class_mass();
        let mut worst: f64 = 0.0;
        for (k, members) in bags.bags().enumerate() {
            for h in 0..self.0.ncols() {
                let sum: f64 = members.iter().map(|&i| self.0[(i, h)]).sum();
                worst = worst.max((sum - target[(k, h)]).abs());
            }
        }
        worst
    }

    fn domain_violation(&self) -> f64 {
        self.0
            .row_iter()
            .map(|row| {
                let neg = row.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
                neg.max((row.sum() - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Shifts each bag uniformly so its sum equals `b_k`: the Euclidean
/// projection onto `{f : sum_{i in B_k} f_i = b_k for all k}`.
pub fn project_bag_mass(f: &SoftLabelVector, bags: &BagConstraintSystem) -> SoftLabelVector {
    let mut out = f.clone();
    out.project_mass(bags);
    out
}

/// Per-class version of [`project_bag_mass`] for multiclass soft labels.
pub fn project_class_mass(f: &SoftLabelMatrix, bags: &BagConstraintSystem) -> SoftLabelMatrix {
    let mut out = f.clone();
    out.project_mass(bags);
    out
}

/// Clamps every entry into `[0, 1]`.
pub fn project_box(f: &SoftLabelVector) -> SoftLabelVector {
    let mut out = f.clone();
    out.project_domain();
    out
}

/// Projects every row onto the probability simplex.
pub fn project_row_simplex(f: &SoftLabelMatrix) -> SoftLabelMatrix {
    let mut out = f.clone();
    out.project_domain();
    out
}

/// Sort-and-threshold projection of `v` onto `{p : p >= 0, sum p = 1}`.
pub fn project_simplex_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Result of an alternating-projections run.
#[derive(Debug, Clone, PartialEq)]
pub struct ApOutcome<T> {
    pub value: T,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Runs mass-then-domain sweeps until the residual is at most `tol` or
/// `max_iter` sweeps have been made. Never fails; check `converged`.
pub fn alternating_projections_unchecked<T: Projectable>(
    mut x: T,
    bags: &BagConstraintSystem,
    tol: f64,
    max_iter: usize,
) -> ApOutcome<T> {
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter.max(1) {
        x.project_mass(bags);
        x.project_domain();
        residual = x.residual(bags);
        if residual <= tol {
            return ApOutcome {
                value: x,
                iterations: it,
                residual,
                converged: true,
            };
        }
    }
    ApOutcome {
        value: x,
        iterations: max_iter.max(1),
        residual,
        converged: false,
    }
}

/// Finds a point in `{A f = b}` intersected with the box (vectors) or the row
/// simplex (matrices). Returns `NonConvergence` if the residual is still above
/// `tol` after `max_iter` sweeps, which usually means the intersection is
/// empty or nearly so.
pub fn alternating_projections<T: Projectable>(
    x: T,
    bags: &BagConstraintSystem,
    tol: f64,
    max_iter: usize,
) -> Result<ApOutcome<T>> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(LlpError::InvalidInput(
            "alternating projections need tol > 0 and max_iter >= 1".into(),
        ));
    }
    let out = alternating_projections_unchecked(x, bags, tol, max_iter);
    if out.converged {
        Ok(out)
    } else {
        Err(LlpError::NonConvergence {
            stage: Stage::AlternatingProjections,
            iterations: out.iterations,
            residual: out.residual,
        })
    }
}
