//! Label propagation solvers: the classic semi-supervised fixed point, the
//! LP-LLP outer loop that alternates propagation with bag-mass projections,
//! and the one-step weighted k-NN smoother.

use nalgebra::linalg::{Cholesky, LU};
use nalgebra::{DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::bags::BagConstraintSystem;
use crate::error::{LlpError, Result, Stage};
use crate::graph::RowStochasticGraph;
use crate::projections::{alternating_projections, Projectable, SoftLabelMatrix, SoftLabelVector};

/// Condition numbers above this are reported as ill-conditioned.
const MAX_CONDITION: f64 = 1e12;
const STOCHASTIC_TOL: f64 = 1e-9;

/// How `(I - alpha S) x = f` is solved inside the propagation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    #[default]
    ClosedForm,
    PowerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub alpha: f64,
    pub inner_solver: InnerSolver,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub ap_tol: f64,
    pub ap_max_iter: usize,
    /// Multiply each propagation step by `(1 - alpha)`. Off by default: the
    /// outer loop applies the bare resolvent `(I - alpha S)^-1`.
    pub scaled_resolvent: bool,
    pub power_tol: f64,
    pub power_max_iter: usize,
    /// When set, records `Q(f)` with this regularization weight after every
    /// outer step, measured against the initial bag-proportion labels.
    pub objective_mu: Option<f64>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            alpha: 0.5,
            inner_solver: InnerSolver::ClosedForm,
            outer_tol: 1e-5,
            outer_max_iter: 200,
            ap_tol: 1e-6,
            ap_max_iter: 1000,
            scaled_resolvent: false,
            power_tol: 1e-12,
            power_max_iter: 10_000,
            objective_mu: None,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LlpError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("outer_tol", self.outer_tol)?;
        positive("ap_tol", self.ap_tol)?;
        positive("power_tol", self.power_tol)?;
        if self.outer_max_iter == 0 || self.ap_max_iter == 0 || self.power_max_iter == 0 {
            return Err(LlpError::Config("iteration limits must be at least 1".into()));
        }
        if let Some(mu) = self.objective_mu {
            if !(mu >= 0.0) {
                return Err(LlpError::Config("objective_mu must be non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PropagationDiagnostics {
    pub outer_iterations: usize,
    pub outer_residual: f64,
    /// `max |f(t+1) - f(t)|` after every outer step.
    pub residual_trace: Vec<f64>,
    pub ap_iterations: Vec<usize>,
    pub objective_trace: Option<Vec<f64>>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(LlpError::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn check_row_stochastic(s: &DMatrix<f64>) -> Result<()> {
    if !s.is_square() {
        return Err(LlpError::InvalidInput("S must be square".into()));
    }
    for (i, row) in s.row_iter().enumerate() {
        if row.iter().any(|&v| !(v >= 0.0)) || (row.sum() - 1.0).abs() > STOCHASTIC_TOL {
            return Err(LlpError::InvalidInput(format!(
                "S is not row-stochastic at row {i}"
            )));
        }
    }
    Ok(())
}

/// Infinity-norm condition bound for `I - alpha S` with row-stochastic `S`:
/// `|I - aS| <= 1 + a` and `|(I - aS)^-1| <= 1 / (1 - a)`.
pub fn condition_bound(alpha: f64) -> f64 {
    (1.0 + alpha) / (1.0 - alpha)
}

enum Factor {
    /// `D - alpha W` is symmetric positive definite when `S = D^-1 W` with symmetric `W`.
    Graph {
        chol: Cholesky<f64, Dyn>,
        degree: Vec<f64>,
    },
    General(LU<f64, Dyn, Dyn>),
}

/// A reusable solver for `(I - alpha S) x = f`.
pub struct Resolvent {
    factor: Factor,
    alpha: f64,
}

impl Resolvent {
    /// Factorizes `D - alpha W` once (Cholesky) for a graph built from a symmetric `W`.
    pub fn from_graph(graph: &RowStochasticGraph, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let cond = condition_bound(alpha);
        if cond > MAX_CONDITION {
            return Err(LlpError::IllConditioned { condition: cond });
        }
        let mut m = graph.weights() * (-alpha);
        for (i, d) in graph.degree().iter().enumerate() {
            m[(i, i)] += d;
        }
        let chol = Cholesky::new(m).ok_or(LlpError::IllConditioned {
            condition: f64::INFINITY,
        })?;
        Ok(Resolvent {
            factor: Factor::Graph {
                chol,
                degree: graph.degree().iter().copied().collect(),
            },
            alpha,
        })
    }

    /// LU factorization of `I - alpha S` for an arbitrary row-stochastic `S`.
    pub fn from_transition(s: &DMatrix<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_row_stochastic(s)?;
        let cond = condition_bound(alpha);
        if cond > MAX_CONDITION {
            return Err(LlpError::IllConditioned { condition: cond });
        }
        let n = s.nrows();
        let m = DMatrix::identity(n, n) - s * alpha;
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(LlpError::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        Ok(Resolvent {
            factor: Factor::General(lu),
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(I - alpha S)^-1 f`, column by column.
    pub fn solve(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.factor {
            Factor::Graph { chol, degree } => {
                let mut rhs = f.clone();
                for (i, mut row) in rhs.row_iter_mut().enumerate() {
                    row *= degree[i];
                }
                chol.solve(&rhs)
            }
            Factor::General(lu) => lu
                .solve(f)
                .expect("LU was checked invertible at construction"),
        }
    }
}

/// `(1 - alpha)(I - alpha S)^-1 Y` via a direct solve.
pub fn propagate_closed_form(
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    alpha: f64,
) -> Result<SoftLabelMatrix> {
    let r = Resolvent::from_transition(s, alpha)?;
    check_rows(s, y)?;
    Ok(SoftLabelMatrix(r.solve(y) * (1.0 - alpha)))
}

fn check_rows(s: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() != s.nrows() {
        return Err(LlpError::LengthMismatch {
            expected: s.nrows(),
            actual: y.nrows(),
        });
    }
    Ok(())
}

/// Iterates `F(t+1) = alpha S F(t) + (1 - alpha) Y` from `F(0) = Y` until
/// `max |F(t+1) - F(t)| <= tol`. Returns the limit and the iteration count.
pub fn propagate_power_iteration(
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(SoftLabelMatrix, usize)> {
    check_alpha(alpha)?;
    check_row_stochastic(s)?;
    check_rows(s, y)?;
    let source = y * (1.0 - alpha);
    let (f, it) = fixed_point(s, &source, y.clone(), alpha, tol, max_iter)?;
    Ok((SoftLabelMatrix(f), it))
}

/// Iterates `x <- alpha S x + source` from `start`.
fn fixed_point(
    s: &DMatrix<f64>,
    source: &DMatrix<f64>,
    start: DMatrix<f64>,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let mut x = start;
    let mut delta = f64::INFINITY;
    for it in 1..=max_iter {
        let next = s * &x * alpha + source;
        delta = (&next - &x).amax();
        x = next;
        if delta <= tol {
            return Ok((x, it));
        }
    }
    Err(LlpError::NonConvergence {
        stage: Stage::PowerIteration,
        iterations: max_iter,
        residual: delta,
    })
}

/// Initial soft labels: each instance gets its bag's positive-class proportion.
pub fn init_soft_labels(bags: &BagConstraintSystem) -> SoftLabelVector {
    let n = bags.bags().map(<[usize]>::len).sum();
    let mut f = vec![0.0; n];
    let mass = bags.positive_mass();
    for (k, members) in bags.bags().enumerate() {
        let p = mass[k] / members.len() as f64;
        for &i in members {
            f[i] = p;
        }
    }
    SoftLabelVector(f)
}

/// Multiclass initial soft labels: each row is its bag's proportion row.
pub fn init_soft_label_matrix(bags: &BagConstraintSystem) -> SoftLabelMatrix {
    let n = bags.bags().map(<[usize]>::len).sum();
    let c = bags.n_classes();
    let mass = bags.class_mass();
    let mut f = DMatrix::zeros(n, c);
    for (k, members) in bags.bags().enumerate() {
        for &i in members {
            for h in 0..c {
                f[(i, h)] = mass[(k, h)] / members.len() as f64;
            }
        }
    }
    SoftLabelMatrix(f)
}

trait Columns: Projectable {
    fn to_columns(&self) -> DMatrix<f64>;
    fn from_columns(m: DMatrix<f64>) -> Self;
    fn objective(&self, s: &DMatrix<f64>, prior: &Self, mu: f64) -> f64;
}

impl Columns for SoftLabelVector {
    fn to_columns(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.0.len(), 1, &self.0)
    }

    fn from_columns(m: DMatrix<f64>) -> Self {
        SoftLabelVector(m.as_slice().to_vec())
    }

    fn objective(&self, s: &DMatrix<f64>, prior: &Self, mu: f64) -> f64 {
        evaluate_objective(&self.0, s, &prior.0, mu)
    }
}

impl Columns for SoftLabelMatrix {
    fn to_columns(&self) -> DMatrix<f64> {
        self.0.clone()
    }

    fn from_columns(m: DMatrix<f64>) -> Self {
        SoftLabelMatrix(m)
    }

    fn objective(&self, s: &DMatrix<f64>, prior: &Self, mu: f64) -> f64 {
        (0..self.0.ncols())
            .map(|h| {
                let f: Vec<f64> = self.0.column(h).iter().copied().collect();
                let y: Vec<f64> = prior.0.column(h).iter().copied().collect();
                evaluate_objective(&f, s, &y, mu)
            })
            .sum()
    }
}

/// The propagation step used inside the outer loop.
struct Propagator<'a> {
    s: &'a DMatrix<f64>,
    resolvent: Option<Resolvent>,
    config: &'a PropagationConfig,
}

impl<'a> Propagator<'a> {
    fn new(graph: &'a RowStochasticGraph, config: &'a PropagationConfig) -> Result<Self> {
        let resolvent = match config.inner_solver {
            InnerSolver::ClosedForm => Some(Resolvent::from_graph(graph, config.alpha)?),
            InnerSolver::PowerIteration => None,
        };
        Ok(Propagator {
            s: graph.s(),
            resolvent,
            config,
        })
    }

    fn apply(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut x = match &self.resolvent {
            Some(r) => r.solve(f),
            None => {
                fixed_point(
                    self.s,
                    f,
                    f.clone(),
                    self.config.alpha,
                    self.config.power_tol,
                    self.config.power_max_iter,
                )?
                .0
            }
        };
        if self.config.scaled_resolvent {
            x *= 1.0 - self.config.alpha;
        }
        Ok(x)
    }
}

fn outer_loop<T: Columns>(
    graph: &RowStochasticGraph,
    bags: &BagConstraintSystem,
    init: T,
    config: &PropagationConfig,
) -> Result<(T, PropagationDiagnostics)> {
    config.validate()?;
    if bags.bags().map(<[usize]>::len).sum::<usize>() != graph.n() {
        return Err(LlpError::LengthMismatch {
            expected: graph.n(),
            actual: bags.bags().map(<[usize]>::len).sum(),
        });
    }
    let propagator = Propagator::new(graph, config)?;
    let mut diag = PropagationDiagnostics {
        objective_trace: config.objective_mu.map(|_| Vec::new()),
        ..Default::default()
    };
    let prior = init.clone();
    let mut f = init;
    for t in 1..=config.outer_max_iter {
        let propagated = T::from_columns(propagator.apply(&f.to_columns())?);
        let projected = alternating_projections(propagated, bags, config.ap_tol, config.ap_max_iter)?;
        let residual = projected.value.max_abs_diff(&f);
        f = projected.value;
        diag.ap_iterations.push(projected.iterations);
        diag.residual_trace.push(residual);
        diag.outer_iterations = t;
        diag.outer_residual = residual;
        if let (Some(mu), Some(trace)) = (config.objective_mu, diag.objective_trace.as_mut()) {
            trace.push(f.objective(graph.s(), &prior, mu));
        }
        if residual <= config.outer_tol {
            return Ok((f, diag));
        }
    }
    Err(LlpError::NonConvergence {
        stage: Stage::OuterLoop,
        iterations: config.outer_max_iter,
        residual: diag.outer_residual,
    })
}

/// Binary LP-LLP: starts from the bag proportions and alternates propagation
/// with alternating projections onto `{A f = b} ∩ [0,1]^n` until successive
/// iterates differ by at most `outer_tol`.
pub fn lp_llp(
    graph: &RowStochasticGraph,
    bags: &BagConstraintSystem,
    config: &PropagationConfig,
) -> Result<(SoftLabelVector, PropagationDiagnostics)> {
    outer_loop(graph, bags, init_soft_labels(bags), config)
}

/// Multiclass LP-LLP over the row simplex with per-class bag mass.
pub fn lp_llp_multiclass(
    graph: &RowStochasticGraph,
    bags: &BagConstraintSystem,
    config: &PropagationConfig,
) -> Result<(SoftLabelMatrix, PropagationDiagnostics)> {
    outer_loop(graph, bags, init_soft_label_matrix(bags), config)
}

/// Thresholds at 0.5; exactly 0.5 maps to class 1.
pub fn decide_labels(f: &SoftLabelVector) -> Vec<usize> {
    f.0.iter().map(|&v| usize::from(v >= 0.5)).collect()
}

/// Row-wise argmax; ties go to the lowest class id.
pub fn decide_labels_multiclass(f: &SoftLabelMatrix) -> Vec<usize> {
    f.0.row_iter()
        .map(|row| {
            let mut best = 0;
            for (h, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = h;
                }
            }
            best
        })
        .collect()
}

/// One-step weighted k-NN estimate `S y`.
pub fn weighted_knn_baseline(s: &DMatrix<f64>, soft_labels: &SoftLabelVector) -> Result<SoftLabelVector> {
    if s.ncols() != soft_labels.len() {
        return Err(LlpError::LengthMismatch {
            expected: s.ncols(),
            actual: soft_labels.len(),
        });
    }
    let y = DMatrix::from_column_slice(soft_labels.len(), 1, soft_labels.as_slice());
    Ok(SoftLabelVector((s * y).as_slice().to_vec()))
}

/// `Q(f) = sum_ij s_ij (f_i - f_j)^2 + mu * sum_i (f_i - y_i)^2`.
pub fn evaluate_objective(f: &[f64], s: &DMatrix<f64>, y_ref: &[f64], mu: f64) -> f64 {
    let smooth: f64 = s
        .row_iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .zip(f)
                .map(|(&sij, &fj)| sij * (f[i] - fj).powi(2))
                .sum::<f64>()
        })
        .sum();
    let fit: f64 = f.iter().zip(y_ref).map(|(a, b)| (a - b).powi(2)).sum();
    smooth + mu * fit
}

/// One-hot `n x c` label matrix.
pub fn one_hot(labels: &[usize], n_classes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), n_classes, |i, h| f64::from(u8::from(labels[i] == h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use approx::assert_abs_diff_eq;

    fn swap2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn closed_form_small_alpha_is_identity() {
        let s = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.5, 1.0, 0.0, 0.0, 0.25, 0.75, 0.0]);
        let y = one_hot(&[0, 1, 1], 2);
        let f = propagate_closed_form(&s, &y, 1e-12).unwrap();
        assert!((f.0 - &y).amax() <= 1e-9);
    }

    #[test]
    fn closed_form_two_nodes() {
        // (I - 0.5 S)^-1 = (4/3)[[1, .5], [.5, 1]]; times (1 - 0.5) on e_0
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let f = propagate_closed_form(&swap2(), &y, 0.5).unwrap();
        assert_abs_diff_eq!(f.0[(0, 0)], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.0[(1, 0)], 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(f.0[(0, 1)], 0.0);
    }

    #[test]
    fn closed_form_zero_labels() {
        let f = propagate_closed_form(&swap2(), &DMatrix::zeros(2, 3), 0.7).unwrap();
        assert_eq!(f.0, DMatrix::zeros(2, 3));
    }

    #[test]
    fn rejects_alpha_out_of_range() {
        let y = DMatrix::zeros(2, 2);
        assert!(propagate_closed_form(&swap2(), &y, 1.0).is_err());
        assert!(propagate_closed_form(&swap2(), &y, 0.0).is_err());
        assert!(propagate_power_iteration(&swap2(), &y, 1.5, 1e-9, 10).is_err());
    }

    #[test]
    fn near_one_alpha_is_ill_conditioned() {
        let y = DMatrix::zeros(2, 2);
        let err = propagate_closed_form(&swap2(), &y, 1.0 - 1e-13).unwrap_err();
        assert!(matches!(err, LlpError::IllConditioned { .. }));
    }

    #[test]
    fn rejects_non_stochastic() {
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 0.9, 1.0, 0.0]);
        assert!(propagate_closed_form(&s, &DMatrix::zeros(2, 2), 0.5).is_err());
    }

    #[test]
    fn power_iteration_zero_fixed_point() {
        let (f, it) = propagate_power_iteration(&swap2(), &DMatrix::zeros(2, 2), 0.5, 1e-12, 10).unwrap();
        assert_eq!(it, 1);
        assert_eq!(f.0, DMatrix::zeros(2, 2));
    }

    #[test]
    fn power_iteration_matches_closed_form() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (f, _) = propagate_power_iteration(&swap2(), &y, 0.5, 1e-12, 1000).unwrap();
        let g = propagate_closed_form(&swap2(), &y, 0.5).unwrap();
        assert!((f.0 - g.0).amax() <= 1e-8);
    }

    #[test]
    fn power_iteration_geometric_bound() {
        let s = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0]);
        let y = one_hot(&[0, 1, 1], 2);
        let (alpha, tol) = (0.9f64, 1e-10f64);
        let (_, it) = propagate_power_iteration(&s, &y, alpha, tol, 10_000).unwrap();
        let bound = (tol.ln() / alpha.ln()).ceil() as usize;
        assert!(it <= bound + 2, "{it} > {bound} + 2");
    }

    #[test]
    fn power_iteration_reports_max_iter() {
        let y = one_hot(&[0, 1], 2);
        let err = propagate_power_iteration(&swap2(), &y, 0.9, 1e-14, 3).unwrap_err();
        assert!(matches!(
            err,
            LlpError::NonConvergence {
                stage: Stage::PowerIteration,
                iterations: 3,
                ..
            }
        ));
    }

    #[test]
    fn graph_resolvent_matches_general() {
        let ds = Dataset::from_rows(
            &[vec![0.0, 0.0], vec![0.5, 0.1], vec![2.0, 1.0], vec![1.0, 3.0]],
            None,
        )
        .unwrap();
        let g = RowStochasticGraph::gaussian(&ds, 0.3).unwrap();
        let y = one_hot(&[0, 1, 1, 0], 2);
        let a = Resolvent::from_graph(&g, 0.6).unwrap().solve(&y);
        let b = Resolvent::from_transition(g.s(), 0.6).unwrap().solve(&y);
        assert!((a - b).amax() <= 1e-12);
    }

    #[test]
    fn init_broadcasts_proportions() {
        let bags = BagConstraintSystem::binary(vec![vec![0, 1], vec![2, 3]], vec![1.2, 0.8]);
        let f = init_soft_labels(&bags);
        for (a, b) in f.0.iter().zip([0.6, 0.6, 0.4, 0.4]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let one = BagConstraintSystem::binary(vec![vec![0, 1, 2]], vec![3.0]);
        assert_eq!(init_soft_labels(&one).0, vec![1.0; 3]);
    }

    #[test]
    fn init_multiclass_rows() {
        let bags = crate::bags::BagStructure::from_proportions(
            &[0, 0],
            DMatrix::from_row_slice(1, 3, &[0.2, 0.3, 0.5]),
        )
        .unwrap()
        .constraints();
        let f = init_soft_label_matrix(&bags);
        for i in 0..2 {
            for (h, p) in [0.2, 0.3, 0.5].iter().enumerate() {
                assert_abs_diff_eq!(f.0[(i, h)], *p, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn thresholding() {
        assert_eq!(decide_labels(&SoftLabelVector(vec![0.2, 0.7])), vec![0, 1]);
        assert_eq!(decide_labels(&SoftLabelVector(vec![0.5])), vec![1]);
        assert_eq!(decide_labels(&SoftLabelVector(vec![0.49; 4])), vec![0; 4]);
    }

    #[test]
    fn argmax_decisions() {
        let f = SoftLabelMatrix(DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.5, 0.5]));
        assert_eq!(decide_labels_multiclass(&f), vec![1, 0]);
        let labels = vec![2, 0, 1, 1, 2];
        assert_eq!(decide_labels_multiclass(&SoftLabelMatrix(one_hot(&labels, 3))), labels);
    }

    #[test]
    fn knn_baseline() {
        let s = DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 0.8, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0]);
        let c = weighted_knn_baseline(&s, &SoftLabelVector(vec![0.3; 3])).unwrap();
        for v in c.0 {
            assert_abs_diff_eq!(v, 0.3, epsilon = 1e-15);
        }
        let swapped = weighted_knn_baseline(&swap2(), &SoftLabelVector(vec![1.0, 0.0])).unwrap();
        assert_eq!(swapped.0, vec![0.0, 1.0]);
    }

    #[test]
    fn objective_examples() {
        let s = swap2();
        assert_eq!(evaluate_objective(&[0.4, 0.4], &s, &[0.4, 0.4], 3.0), 0.0);
        assert_eq!(evaluate_objective(&[0.0, 1.0], &s, &[0.0, 1.0], 1.0), 2.0);
    }

    #[test]
    fn objective_matches_double_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 7;
        let s = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut expected = 0.0;
        for i in 0..n {
            for j in 0..n {
                expected += s[(i, j)] * (f[i] - f[j]) * (f[i] - f[j]);
            }
        }
        for i in 0..n {
            expected += 0.7 * (f[i] - y[i]) * (f[i] - y[i]);
        }
        assert_abs_diff_eq!(evaluate_objective(&f, &s, &y, 0.7), expected, epsilon = 1e-12);
    }

    fn two_blobs() -> (Dataset, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let t = i as f64 * 0.1;
            rows.push(vec![t, 0.05 * t]);
            labels.push(0);
            rows.push(vec![6.0 + t, 0.05 * t]);
            labels.push(1);
        }
        (Dataset::from_rows(&rows, None).unwrap(), labels)
    }

    #[test]
    fn lp_llp_pure_bags_recover() {
        let (ds, labels) = two_blobs();
        let g = RowStochasticGraph::gaussian(&ds, 0.5).unwrap();
        // two bags that each mix points from both blobs but are label-pure
        let bags = crate::bags::BagStructure::from_labels(&labels, &labels, 2)
            .unwrap()
            .constraints();
        let (f, diag) = lp_llp(&g, &bags, &PropagationConfig::default()).unwrap();
        assert_eq!(decide_labels(&f), labels);
        assert!(diag.outer_iterations >= 1);
        assert!(f.mass_violation(&bags) <= 1e-6);
        assert_eq!(f.domain_violation(), 0.0);
    }

    #[test]
    fn lp_llp_objective_trace_recorded() {
        let (ds, labels) = two_blobs();
        let g = RowStochasticGraph::gaussian(&ds, 0.5).unwrap();
        let assignment: Vec<usize> = (0..labels.len()).map(|i| i % 2).collect();
        let bags = crate::bags::BagStructure::from_labels(&assignment, &labels, 2)
            .unwrap()
            .constraints();
        let config = PropagationConfig {
            objective_mu: Some(1.0),
            ..Default::default()
        };
        let (_, diag) = lp_llp(&g, &bags, &config).unwrap();
        let trace = diag.objective_trace.unwrap();
        assert_eq!(trace.len(), diag.outer_iterations);
        assert!(trace.iter().all(|q| q.is_finite() && *q >= 0.0));
    }

    #[test]
    fn lp_llp_power_inner_matches_closed_form() {
        let (ds, labels) = two_blobs();
        let g = RowStochasticGraph::gaussian(&ds, 0.5).unwrap();
        let assignment: Vec<usize> = (0..labels.len()).map(|i| usize::from(i >= 10)).collect();
        let bags = crate::bags::BagStructure::from_labels(&assignment, &labels, 2)
            .unwrap()
            .constraints();
        let (a, _) = lp_llp(&g, &bags, &PropagationConfig::default()).unwrap();
        let config = PropagationConfig {
            inner_solver: InnerSolver::PowerIteration,
            ..Default::default()
        };
        let (b, _) = lp_llp(&g, &bags, &config).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-6);
    }

    #[test]
    fn lp_llp_multiclass_feasible() {
        let (ds, _) = two_blobs();
        let g = RowStochasticGraph::gaussian(&ds, 0.5).unwrap();
        let labels: Vec<usize> = (0..20).map(|i| (i * 7) % 3).collect();
        let assignment: Vec<usize> = (0..20).map(|i| i % 4).collect();
        let bags = crate::bags::BagStructure::from_labels(&assignment, &labels, 3)
            .unwrap()
            .constraints();
        let config = PropagationConfig {
            outer_max_iter: 2000,
            ..Default::default()
        };
        let (f, _) = lp_llp_multiclass(&g, &bags, &config).unwrap();
        assert!(f.mass_violation(&bags) <= 1e-6);
        assert!(f.domain_violation() <= 1e-12);
    }
}
