use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{BagConfig, HalfKernelParams};
use crate::error::{LlpError, Result};
use crate::propagation::{InnerSolver, PropagationConfig};

/// Where the instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Xor,
    HalfKernel(HalfKernelParams),
    /// A labeled feature file. Without `bags_path` the harness draws a test bag
    /// and splits the rest by `bags`; with it, `test_bag` names the bag scored
    /// as test data (all instances are scored when absent).
    Csv {
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        bags_path: Option<PathBuf>,
        #[serde(default)]
        test_bag: Option<usize>,
    },
}

impl DatasetSource {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSource::Xor => "xor",
            DatasetSource::HalfKernel(_) => "half_kernel",
            DatasetSource::Csv { .. } => "csv",
        }
    }
}

/// How a labeling is scored during kernel bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaScore {
    /// `f̄ = 2 * label - 1` from thresholded labels.
    #[default]
    Hard,
    /// `f̄ = 2 f - 1` from the soft labels.
    Soft,
}

/// One experiment: a data source, a bag configuration and the protocol knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub bags: BagConfig,
    pub n_train: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default)]
    pub gamma_score: GammaScore,
    #[serde(default)]
    pub inner_solver: InnerSolver,
    #[serde(default)]
    pub scaled_resolvent: bool,
    #[serde(default = "default_outer_tol")]
    pub outer_tol: f64,
    #[serde(default = "default_outer_max_iter")]
    pub outer_max_iter: usize,
    #[serde(default = "default_ap_tol")]
    pub ap_tol: f64,
    #[serde(default = "default_ap_max_iter")]
    pub ap_max_iter: usize,
    #[serde(default)]
    pub objective_mu: Option<f64>,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub eval_all: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_repeats() -> usize {
    25
}

fn default_alpha() -> f64 {
    0.5
}

fn default_outer_tol() -> f64 {
    PropagationConfig::default().outer_tol
}

fn default_outer_max_iter() -> usize {
    PropagationConfig::default().outer_max_iter
}

fn default_ap_tol() -> f64 {
    PropagationConfig::default().ap_tol
}

fn default_ap_max_iter() -> usize {
    PropagationConfig::default().ap_max_iter
}

/// 13 log-spaced values from 1e-3 to 1e3.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

impl ExperimentConfig {
    /// A synthetic experiment with every protocol default.
    pub fn synthetic(dataset: DatasetSource, bags: BagConfig, n_train: usize) -> Self {
        ExperimentConfig {
            dataset,
            bags,
            n_train,
            test_fraction: default_test_fraction(),
            repeats: default_repeats(),
            alpha: default_alpha(),
            gamma_grid: default_gamma_grid(),
            gamma_score: GammaScore::default(),
            inner_solver: InnerSolver::default(),
            scaled_resolvent: false,
            outer_tol: default_outer_tol(),
            outer_max_iter: default_outer_max_iter(),
            ap_tol: default_ap_tol(),
            ap_max_iter: default_ap_max_iter(),
            objective_mu: None,
            standardize: false,
            eval_all: false,
            seed: 0,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LlpError::io(path, e))?;
        ExperimentConfig::from_json_str(&text)
    }

    pub fn propagation(&self) -> PropagationConfig {
        PropagationConfig {
            alpha: self.alpha,
            inner_solver: self.inner_solver,
            outer_tol: self.outer_tol,
            outer_max_iter: self.outer_max_iter,
            ap_tol: self.ap_tol,
            ap_max_iter: self.ap_max_iter,
            scaled_resolvent: self.scaled_resolvent,
            objective_mu: self.objective_mu,
            ..PropagationConfig::default()
        }
    }

    /// Table row code such as `600B`.
    pub fn format_code(&self) -> String {
        format!("{}{}", self.n_train, self.bags.code())
    }

    pub fn n_test(&self) -> usize {
        (self.n_train as f64 * self.test_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(LlpError::Config("repeats must be at least 1".into()));
        }
        if self.gamma_grid.is_empty() {
            return Err(LlpError::Config("gamma_grid must not be empty".into()));
        }
        if let Some(g) = self.gamma_grid.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(LlpError::Config(format!("gamma_grid value {g} is not positive")));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(LlpError::Config("test_fraction must lie in [0, 1)".into()));
        }
        if self.bags.positive_proportions().is_empty() {
            return Err(LlpError::Config("bag configuration has no bags".into()));
        }
        self.propagation().validate()
    }
}

/// Parses `120A,600B,...` into `(n_train, bag config)` pairs.
pub fn parse_formats(list: &str) -> Result<Vec<(usize, BagConfig)>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|code| {
            let split = code.len() - 1;
            let (digits, letter) = code.split_at(split);
            let n = digits
                .parse()
                .map_err(|_| LlpError::Config(format!("bad format code {code:?}")))?;
            let bags = BagConfig::from_code(letter)
                .ok_or_else(|| LlpError::Config(format!("unknown bag configuration in {code:?}")))?;
            Ok((n, bags))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_fills_defaults() {
        let c = ExperimentConfig::from_json_str(
            r#"{"dataset": {"kind": "xor"}, "bags": "b", "n_train": 600, "seed": 3}"#,
        )
        .unwrap();
        assert_eq!(c.repeats, 25);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.gamma_grid.len(), 13);
        assert_eq!(c.format_code(), "600B");
        assert_eq!(c.n_test(), 120);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_json_str(
            r#"{"dataset": {"kind": "xor"}, "bags": "a", "n_train": 60, "colour": 1}"#,
        );
        assert!(err.is_err());
        let nested = ExperimentConfig::from_json_str(
            r#"{"dataset": {"kind": "half_kernel", "radius": 3}, "bags": "a", "n_train": 60}"#,
        );
        assert!(nested.is_err());
    }

    #[test]
    fn half_kernel_and_custom_bags() {
        let c = ExperimentConfig::from_json_str(
            r#"{"dataset": {"kind": "half_kernel", "noise_sd": 0.2},
                "bags": {"custom": {"proportions": [0.1, 0.9]}}, "n_train": 60}"#,
        )
        .unwrap();
        match c.dataset {
            DatasetSource::HalfKernel(p) => {
                assert_eq!(p.noise_sd, 0.2);
                assert_eq!(p.inner_radius, 5.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(c.bags.positive_proportions(), vec![0.1, 0.9]);
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            r#"{"dataset": {"kind": "xor"}, "bags": "a", "n_train": 60, "repeats": 0}"#,
            r#"{"dataset": {"kind": "xor"}, "bags": "a", "n_train": 60, "gamma_grid": []}"#,
            r#"{"dataset": {"kind": "xor"}, "bags": "a", "n_train": 60, "gamma_grid": [-1.0]}"#,
            r#"{"dataset": {"kind": "xor"}, "bags": "a", "n_train": 60, "alpha": 1.0}"#,
        ] {
            assert!(ExperimentConfig::from_json_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = default_gamma_grid();
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[12] - 1e3).abs() < 1e-9);
        assert!((g[6] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn format_codes() {
        let f = parse_formats("120A, 600B").unwrap();
        assert_eq!(f, vec![(120, BagConfig::A), (600, BagConfig::B)]);
        assert!(parse_formats("120C").is_err());
        assert!(parse_formats("xB").is_err());
    }
}
