//! Synthetic datasets (XOR, Half-Kernel) and random bag assignment with
//! prescribed class proportions.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bags::BagStructure;
use crate::dataset::Dataset;
use crate::error::{LlpError, Result};
use crate::rng::RngSeed;

/// Side length of the XOR square.
pub const XOR_SIDE: f64 = 10.0;

/// Corner means in generation order, with their class.
pub const XOR_CORNERS: [([f64; 2], usize); 4] = [
    ([0.0, 0.0], 0),
    ([XOR_SIDE, 0.0], 1),
    ([0.0, XOR_SIDE], 1),
    ([XOR_SIDE, XOR_SIDE], 0),
];

/// Four unit-variance Gaussian clusters on the corners of a square; diagonal
/// corners share a class. Points are emitted corner by corner, round-robin,
/// so the first four points hit the corners in [`XOR_CORNERS`] order.
pub fn gen_xor(n_total: usize, seed: RngSeed) -> Result<Dataset> {
    if n_total < 4 || !n_total.is_multiple_of(4) {
        return Err(LlpError::InvalidInput(format!(
            "XOR needs a positive multiple of 4 points, got {n_total}"
        )));
    }
    let mut rng = seed.rng();
    let mut rows = Vec::with_capacity(n_total);
    let mut labels = Vec::with_capacity(n_total);
    for i in 0..n_total {
        let (mean, class) = XOR_CORNERS[i % 4];
        let dx: f64 = StandardNormal.sample(&mut rng);
        let dy: f64 = StandardNormal.sample(&mut rng);
        rows.push(vec![mean[0] + dx, mean[1] + dy]);
        labels.push(class);
    }
    Dataset::from_rows(&rows, Some(labels))
}

/// Shape of the Half-Kernel generator: two concentric upper half-rings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HalfKernelParams {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub noise_sd: f64,
}

impl Default for HalfKernelParams {
    fn default() -> Self {
        HalfKernelParams {
            inner_radius: 5.0,
            outer_radius: 8.0,
            noise_sd: 0.5,
        }
    }
}

/// Class 0 on the inner arc, class 1 on the outer arc:
/// `(r cos t, r sin t) + N(0, noise_sd^2 I)` with `t ~ U[0, pi]`.
/// Classes alternate point by point.
pub fn gen_half_kernel(n_total: usize, params: HalfKernelParams, seed: RngSeed) -> Result<Dataset> {
    if n_total < 2 || !n_total.is_multiple_of(2) {
        return Err(LlpError::InvalidInput(format!(
            "Half-Kernel needs a positive even number of points, got {n_total}"
        )));
    }
    if !(params.noise_sd >= 0.0 && params.noise_sd.is_finite()) {
        return Err(LlpError::InvalidInput("noise_sd must be non-negative".into()));
    }
    if !(0.0 < params.inner_radius && params.inner_radius < params.outer_radius) {
        return Err(LlpError::InvalidInput(
            "radii must satisfy 0 < inner < outer".into(),
        ));
    }
    let mut rng = seed.rng();
    let noise = Normal::new(0.0, params.noise_sd)
        .map_err(|e| LlpError::InvalidInput(e.to_string()))?;
    let mut rows = Vec::with_capacity(n_total);
    let mut labels = Vec::with_capacity(n_total);
    for i in 0..n_total {
        let class = i % 2;
        let r = if class == 0 {
            params.inner_radius
        } else {
            params.outer_radius
        };
        let t: f64 = rng.random_range(0.0..=PI);
        let (ex, ey) = if params.noise_sd > 0.0 {
            (noise.sample(&mut rng), noise.sample(&mut rng))
        } else {
            (0.0, 0.0)
        };
        rows.push(vec![r * t.cos() + ex, r * t.sin() + ey]);
        labels.push(class);
    }
    Dataset::from_rows(&rows, Some(labels))
}

/// Named bag proportion configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BagConfig {
    A,
    B,
    Custom { proportions: Vec<f64> },
}

impl BagConfig {
    pub fn positive_proportions(&self) -> Vec<f64> {
        match self {
            BagConfig::A => vec![0.60, 0.40, 0.50],
            BagConfig::B => vec![0.85, 0.25, 0.40],
            BagConfig::Custom { proportions } => proportions.clone(),
        }
    }

    pub fn code(&self) -> String {
        match self {
            BagConfig::A => "A".into(),
            BagConfig::B => "B".into(),
            BagConfig::Custom { .. } => "C".into(),
        }
    }

    pub fn from_code(code: &str) -> Option<BagConfig> {
        match code {
            "A" | "a" => Some(BagConfig::A),
            "B" | "b" => Some(BagConfig::B),
            _ => None,
        }
    }
}

/// Positive-class proportion and size for every bag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagSpec {
    pub proportions: Vec<f64>,
    pub bag_sizes: Vec<usize>,
}

impl BagSpec {
    /// Splits `n` into `proportions.len()` near-equal bags (earlier bags get
    /// the remainder).
    pub fn equal_sizes(proportions: Vec<f64>, n: usize) -> Result<Self> {
        let k = proportions.len();
        if k == 0 || n < k {
            return Err(LlpError::InvalidInput(format!(
                "cannot split {n} instances into {k} non-empty bags"
            )));
        }
        let bag_sizes = (0..k).map(|j| n / k + usize::from(j < n % k)).collect();
        Ok(BagSpec {
            proportions,
            bag_sizes,
        })
    }

    pub fn n(&self) -> usize {
        self.bag_sizes.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.proportions.len() != self.bag_sizes.len() || self.proportions.is_empty() {
            return Err(LlpError::InvalidInput(
                "bag spec needs one proportion per bag size".into(),
            ));
        }
        if self.proportions.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(LlpError::InvalidInput("proportions must lie in [0, 1]".into()));
        }
        if self.bag_sizes.contains(&0) {
            return Err(LlpError::InvalidInput("bag sizes must be positive".into()));
        }
        Ok(())
    }

    /// Positive count per bag: nearest-integer rounding of `pi_k |B_k|`, or,
    /// when that misses `positives` in total, a largest-remainder split that
    /// keeps each bag within one of its target.
    pub fn positive_counts(&self, positives: usize) -> Result<Vec<usize>> {
        self.validate()?;
        let targets: Vec<f64> = self
            .proportions
            .iter()
            .zip(&self.bag_sizes)
            .map(|(p, &s)| p * s as f64)
            .collect();
        let rounded: Vec<usize> = targets.iter().map(|t| t.round() as usize).collect();
        let infeasible = |needed: usize| {
            let n = self.n();
            LlpError::InfeasibleSpec {
                positives_needed: needed,
                positives_available: positives,
                negatives_needed: n.saturating_sub(needed),
                negatives_available: n.saturating_sub(positives),
            }
        };
        if positives > self.n() {
            return Err(infeasible(rounded.iter().sum()));
        }
        if rounded.iter().sum::<usize>() == positives {
            return Ok(rounded);
        }
        let mut counts: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
        let floor_sum: usize = counts.iter().sum();
        let k = counts.len();
        if positives < floor_sum || positives - floor_sum > k {
            return Err(infeasible(rounded.iter().sum()));
        }
        let mut order: Vec<usize> = (0..k).collect();
        // largest remainder first, lower bag id on ties
        order.sort_by(|&a, &b| {
            let ra = targets[a] - targets[a].floor();
            let rb = targets[b] - targets[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut extra = positives - floor_sum;
        for &j in &order {
            if extra == 0 {
                break;
            }
            if counts[j] < self.bag_sizes[j] {
                counts[j] += 1;
                extra -= 1;
            }
        }
        if extra > 0 {
            return Err(infeasible(rounded.iter().sum()));
        }
        Ok(counts)
    }
}

/// Randomly places instances into bags so that bag `k` receives its prescribed
/// number of positives (class 1) and negatives (every other class).
pub fn assign_bags(dataset: &Dataset, spec: &BagSpec, seed: RngSeed) -> Result<BagStructure> {
    let labels = dataset
        .true_labels()
        .ok_or_else(|| LlpError::InvalidInput("bag assignment needs ground-truth labels".into()))?;
    if spec.n() != dataset.n() {
        return Err(LlpError::LengthMismatch {
            expected: dataset.n(),
            actual: spec.n(),
        });
    }
    let mut positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut negatives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    let pos_counts = spec.positive_counts(positives.len())?;

    let mut rng = seed.rng();
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let mut assignment = vec![0; dataset.n()];
    let (mut p, mut q) = (positives.into_iter(), negatives.into_iter());
    for (k, (&size, &pos)) in spec.bag_sizes.iter().zip(&pos_counts).enumerate() {
        for i in p.by_ref().take(pos) {
            assignment[i] = k;
        }
        for i in q.by_ref().take(size - pos) {
            assignment[i] = k;
        }
    }
    BagStructure::from_labels(&assignment, labels, dataset.n_classes())
}
