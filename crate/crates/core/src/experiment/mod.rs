//! The synthetic-data experiment protocol: seeded data and bags, a labeled
//! test bag whose proportion is known to the solver, kernel bandwidth
//! selection by the `f̄ᵀ S f̄` smoothness score, and accuracy aggregation.

mod config;
mod report;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bags::{load_bag_csv, BagStructure};
use crate::dataset::{load_dataset_csv, Dataset};
use crate::datagen::{assign_bags, gen_half_kernel, gen_xor, BagConfig, BagSpec};
use crate::error::{LlpError, Result};
use crate::graph::RowStochasticGraph;
use crate::projections::SoftLabelVector;
use crate::propagation::{decide_labels, lp_llp, PropagationConfig, PropagationDiagnostics};
use crate::rng::RngSeed;
use crate::BagConstraintSystem;

pub use config::{default_gamma_grid, parse_formats, DatasetSource, ExperimentConfig, GammaScore};
pub use report::{emit_results, format_cell, render_csv, render_json, render_trace, OutputFormat};

/// Fraction of positions where `predicted` equals `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(LlpError::LengthMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(LlpError::InvalidInput("accuracy of an empty label set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `f̄ᵀ S f̄`. For `f̄ ∈ {-1, 1}^n` and row-stochastic `S` it is at most `n`,
/// with equality when `f̄` is constant on every connected component.
pub fn smoothness_score(s: &nalgebra::DMatrix<f64>, signed: &[f64]) -> f64 {
    s.row_iter()
        .zip(signed)
        .map(|(row, fi)| fi * row.iter().zip(signed).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Maps soft labels to the `f̄` vector scored during bandwidth selection.
pub fn signed_labels(f: &SoftLabelVector, score: GammaScore) -> Vec<f64> {
    match score {
        GammaScore::Hard => decide_labels(f)
            .into_iter()
            .map(|l| if l == 1 { 1.0 } else { -1.0 })
            .collect(),
        GammaScore::Soft => f.0.iter().map(|v| 2.0 * v - 1.0).collect(),
    }
}

/// Score of one grid point; `score` is `None` when the solver failed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub gamma: f64,
    pub score: Option<f64>,
    pub error: Option<String>,
}

/// Outcome of bandwidth selection, including the solution at the chosen value.
#[derive(Debug, Clone)]
pub struct GammaSelection {
    pub gamma: f64,
    pub scores: Vec<GridScore>,
    pub soft_labels: SoftLabelVector,
    pub diagnostics: PropagationDiagnostics,
}

/// Runs LP-LLP at every grid value and keeps the one whose thresholded labels
/// score highest under `f̄ᵀ S f̄`. Failed grid points score `-inf`; ties go to
/// the smaller bandwidth.
pub fn select_gamma(
    features: &Dataset,
    bags: &BagConstraintSystem,
    gamma_grid: &[f64],
    config: &PropagationConfig,
    score: GammaScore,
) -> Result<GammaSelection> {
    if gamma_grid.is_empty() {
        return Err(LlpError::Config("gamma_grid must not be empty".into()));
    }
    let mut scores = Vec::with_capacity(gamma_grid.len());
    let mut best: Option<(f64, f64, SoftLabelVector, PropagationDiagnostics)> = None;
    let mut last_error = None;
    for &gamma in gamma_grid {
        if !(gamma > 0.0) {
            return Err(LlpError::Config(format!("gamma_grid value {gamma} is not positive")));
        }
        let run = RowStochasticGraph::gaussian(features, gamma).and_then(|graph| {
            let (f, diag) = lp_llp(&graph, bags, config)?;
            let value = smoothness_score(graph.s(), &signed_labels(&f, score));
            Ok((value, f, diag))
        });
        match run {
            Ok((value, f, diag)) => {
                scores.push(GridScore {
                    gamma,
                    score: Some(value),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((bg, bs, ..)) => value > *bs || (value == *bs && gamma < *bg),
                };
                if better {
                    best = Some((gamma, value, f, diag));
                }
            }
            Err(e) => {
                scores.push(GridScore {
                    gamma,
                    score: None,
                    error: Some(e.to_string()),
                });
                last_error = Some(e);
            }
        }
    }
    match best {
        Some((gamma, _, soft_labels, diagnostics)) => Ok(GammaSelection {
            gamma,
            scores,
            soft_labels,
            diagnostics,
        }),
        None => Err(last_error.expect("non-empty grid with no success has an error")),
    }
}

/// Everything a repeat needs. The solver only ever sees `features` and the
/// bag constraints; `truth` is read for scoring alone.
#[derive(Debug, Clone)]
pub struct PreparedRepeat {
    pub features: Dataset,
    pub bags: BagStructure,
    pub truth: Vec<usize>,
    /// Instances scored as test data.
    pub eval: Vec<usize>,
}

impl PreparedRepeat {
    pub fn train(&self) -> Vec<usize> {
        let mut is_eval = vec![false; self.truth.len()];
        for &i in &self.eval {
            is_eval[i] = true;
        }
        (0..self.truth.len()).filter(|&i| !is_eval[i]).collect()
    }
}

/// Training bags of `n_train` instances split per `bag_config`, followed by a
/// test bag of `n_test` instances whose proportion absorbs the remaining
/// positives of the pool.
fn train_test_spec(bag_config: &BagConfig, n_train: usize, n_test: usize, positives: usize) -> Result<BagSpec> {
    let train = BagSpec::equal_sizes(bag_config.positive_proportions(), n_train)?;
    if n_test == 0 {
        return Ok(train);
    }
    let train_pos: usize = train
        .proportions
        .iter()
        .zip(&train.bag_sizes)
        .map(|(p, &s)| (p * s as f64).round() as usize)
        .sum();
    let test_prop = (positives as f64 - train_pos as f64) / n_test as f64;
    if !(0.0..=1.0).contains(&test_prop) {
        let n = n_train + n_test;
        return Err(LlpError::InfeasibleSpec {
            positives_needed: train_pos,
            positives_available: positives,
            negatives_needed: n_train - train_pos.min(n_train),
            negatives_available: n - positives.min(n),
        });
    }
    let mut spec = train;
    spec.proportions.push(test_prop);
    spec.bag_sizes.push(n_test);
    Ok(spec)
}

fn split_bags(dataset: &Dataset, bag_config: &BagConfig, n_train: usize, n_test: usize, seed: RngSeed) -> Result<(BagStructure, Vec<usize>)> {
    let labels = dataset
        .true_labels()
        .ok_or_else(|| LlpError::InvalidInput("experiment data needs ground-truth labels".into()))?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let spec = train_test_spec(bag_config, n_train, n_test, positives)?;
    let bags = assign_bags(dataset, &spec, seed)?;
    let eval = if n_test > 0 {
        bags.members(bags.n_bags() - 1).to_vec()
    } else {
        (0..dataset.n()).collect()
    };
    Ok((bags, eval))
}

/// Generates or loads the data for repeat `index` and builds its bags.
pub fn prepare_repeat(config: &ExperimentConfig, index: usize) -> Result<PreparedRepeat> {
    let seed = RngSeed(config.seed).derive(index as u64);
    let (data_seed, bag_seed) = (seed.derive(0), seed.derive(1));
    let n_test = config.n_test();
    let (dataset, bags, eval) = match &config.dataset {
        DatasetSource::Xor => {
            let ds = gen_xor(config.n_train + n_test, data_seed)?;
            let (bags, eval) = split_bags(&ds, &config.bags, config.n_train, n_test, bag_seed)?;
            (ds, bags, eval)
        }
        DatasetSource::HalfKernel(params) => {
            let ds = gen_half_kernel(config.n_train + n_test, *params, data_seed)?;
            let (bags, eval) = split_bags(&ds, &config.bags, config.n_train, n_test, bag_seed)?;
            (ds, bags, eval)
        }
        DatasetSource::Csv {
            path,
            label_column,
            bags_path,
            test_bag,
        } => {
            let ds = load_dataset_csv(path, Some(label_column))?;
            let labels = ds.true_labels().expect("label column requested");
            match bags_path {
                Some(bp) => {
                    let assignment = load_bag_csv(bp, ds.n())?;
                    let bags = BagStructure::from_labels(&assignment, labels, ds.n_classes())?;
                    let eval = match test_bag {
                        Some(t) if *t < bags.n_bags() => bags.members(*t).to_vec(),
                        Some(t) => {
                            return Err(LlpError::Config(format!("test_bag {t} does not exist")))
                        }
                        None => (0..ds.n()).collect(),
                    };
                    (ds, bags, eval)
                }
                None => {
                    let tf = config.test_fraction;
                    let n_test = (ds.n() as f64 * tf / (1.0 + tf)).round() as usize;
                    let n_train = ds.n() - n_test;
                    let (bags, eval) = split_bags(&ds, &config.bags, n_train, n_test, bag_seed)?;
                    (ds, bags, eval)
                }
            }
        }
    };
    let truth = dataset
        .true_labels()
        .expect("all sources carry labels")
        .to_vec();
    let mut features = dataset.without_labels();
    if config.standardize {
        features = features.standardized();
    }
    Ok(PreparedRepeat {
        features,
        bags,
        truth,
        eval,
    })
}

/// Solver output for one repeat, computed without access to ground truth.
#[derive(Debug, Clone)]
pub struct RepeatSolution {
    pub selection: GammaSelection,
    pub predictions: Vec<usize>,
}

/// Bandwidth selection plus the final LP-LLP run on the full transductive graph.
pub fn solve_repeat(features: &Dataset, bags: &BagConstraintSystem, config: &ExperimentConfig) -> Result<RepeatSolution> {
    let selection = select_gamma(
        features,
        bags,
        &config.gamma_grid,
        &config.propagation(),
        config.gamma_score,
    )?;
    let predictions = decide_labels(&selection.soft_labels);
    Ok(RepeatSolution {
        selection,
        predictions,
    })
}

/// Per-repeat record in `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub index: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub all_accuracy: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma_scores: Vec<GridScore>,
    pub diagnostics: Option<PropagationDiagnostics>,
    pub error: Option<String>,
}

fn subset(labels: &[usize], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// Runs one repeat end to end. Failures are recorded, not propagated.
pub fn run_repeat(config: &ExperimentConfig, index: usize) -> RepeatRecord {
    let seed = RngSeed(config.seed).derive(index as u64).0;
    let mut record = RepeatRecord {
        index,
        seed,
        accuracy: None,
        train_accuracy: None,
        all_accuracy: None,
        gamma: None,
        gamma_scores: Vec::new(),
        diagnostics: None,
        error: None,
    };
    let outcome = prepare_repeat(config, index).and_then(|prep| {
        let solution = solve_repeat(&prep.features, &prep.bags.constraints(), config)?;
        Ok((prep, solution))
    });
    match outcome {
        Ok((prep, solution)) => {
            let pred = &solution.predictions;
            let score = |idx: &[usize]| -> Option<f64> {
                if idx.is_empty() {
                    None
                } else {
                    accuracy(&subset(pred, idx), &subset(&prep.truth, idx)).ok()
                }
            };
            record.accuracy = score(&prep.eval);
            record.train_accuracy = score(&prep.train());
            if config.eval_all {
                record.all_accuracy = accuracy(pred, &prep.truth).ok();
            }
            record.gamma = Some(solution.selection.gamma);
            record.gamma_scores = solution.selection.scores;
            record.diagnostics = Some(solution.selection.diagnostics);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Aggregated outcome of all repeats of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub format: String,
    pub config: ExperimentConfig,
    pub repeats: Vec<RepeatRecord>,
    /// Test accuracies of completed repeats, in repeat order.
    pub accuracies: Vec<f64>,
    pub mean: Option<f64>,
    /// Sample (n - 1) standard deviation; 0 for a single repeat.
    pub std: Option<f64>,
    pub train_mean: Option<f64>,
    pub completed: usize,
    pub complete: bool,
    /// Excluded from serialization so equal configs give identical files.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExperimentResult {
    pub fn completion_rate(&self) -> f64 {
        self.completed as f64 / self.repeats.len().max(1) as f64
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

/// Runs every repeat (in parallel) and aggregates test accuracy.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let repeats: Vec<RepeatRecord> = (0..config.repeats)
        .into_par_iter()
        .map(|r| run_repeat(config, r))
        .collect();
    let accuracies: Vec<f64> = repeats.iter().filter_map(|r| r.accuracy).collect();
    let train: Vec<f64> = repeats.iter().filter_map(|r| r.train_accuracy).collect();
    let completed = repeats.iter().filter(|r| r.error.is_none()).count();
    let stats = mean_std(&accuracies);
    Ok(ExperimentResult {
        dataset: config.dataset.name().to_string(),
        format: config.format_code(),
        config: config.clone(),
        complete: completed == repeats.len(),
        repeats,
        mean: stats.map(|s| s.0),
        std: stats.map(|s| s.1),
        train_mean: mean_std(&train).map(|s| s.0),
        accuracies,
        completed,
        wall_time: start.elapsed(),
    })
}

/// Runs `base` once per `(n_train, bag config)` format.
pub fn run_sweep(base: &ExperimentConfig, formats: &[(usize, BagConfig)]) -> Result<Vec<ExperimentResult>> {
    formats
        .iter()
        .map(|(n, bags)| {
            let config = ExperimentConfig {
                n_train: *n,
                bags: bags.clone(),
                ..base.clone()
            };
            run_experiment(&config)
        })
        .collect()
}
