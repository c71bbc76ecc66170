use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use rand::Rng;

use lp_llp::propagation::weighted_knn_baseline;
use lp_llp::{Dataset, RngSeed, RowStochasticGraph, SoftLabelVector};

/// The one-step k-NN estimate is the first-order term of `sum_k (alpha S)^k y`
/// divided by alpha.
#[test]
fn knn_is_first_order_series_term() {
    let mut rng = RngSeed(5).rng();
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let graph = RowStochasticGraph::gaussian(&Dataset::from_rows(&rows, None).unwrap(), 2.0).unwrap();
    let y: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
    let alpha = 0.5;

    // First-order term alpha S y, by explicit loop.
    let s = graph.s();
    let mut first = [0.0; 5];
    for i in 0..5 {
        for j in 0..5 {
            first[i] += alpha * s[(i, j)] * y[j];
        }
    }
    let knn = weighted_knn_baseline(s, &SoftLabelVector(y.clone())).unwrap();
    for i in 0..5 {
        assert_abs_diff_eq!(knn.0[i], first[i] / alpha, epsilon = 1e-15);
    }
}

#[test]
fn knn_rejects_mismatched_length() {
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!(weighted_knn_baseline(&s, &SoftLabelVector(vec![1.0])).is_err());
}
