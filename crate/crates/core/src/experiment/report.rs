use std::fs;
use std::path::Path;

use serde::Serialize;

use super::ExperimentResult;
use crate::error::{LlpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// `mean(std)` with two decimals, or `NA` when nothing completed.
pub fn format_cell(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.2}({s:.2})"),
        _ => "NA".into(),
    }
}

/// One row per result: `dataset,format,lp_llp,train,completed,repeats`.
pub fn render_csv(results: &[ExperimentResult]) -> Result<String> {
    if results.is_empty() {
        return Err(LlpError::InvalidInput("no results to emit".into()));
    }
    let mut out = String::from("dataset,format,lp_llp,train,completed,repeats\n");
    for r in results {
        let train = super::mean_std(
            &r.repeats
                .iter()
                .filter_map(|x| x.train_accuracy)
                .collect::<Vec<_>>(),
        );
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.dataset,
            r.format,
            format_cell(r.mean, r.std),
            format_cell(train.map(|t| t.0), train.map(|t| t.1)),
            r.completed,
            r.repeats.len()
        ));
    }
    Ok(out)
}

pub fn render_json(results: &[ExperimentResult]) -> Result<String> {
    if results.is_empty() {
        return Err(LlpError::InvalidInput("no results to emit".into()));
    }
    Ok(serde_json::to_string_pretty(results)?)
}

#[derive(Serialize)]
struct TraceEntry<'a> {
    format: &'a str,
    repeat: usize,
    residual_trace: &'a [f64],
    ap_iterations: &'a [usize],
    objective_trace: Option<&'a [f64]>,
}

/// Outer-loop residual and objective traces of every completed repeat.
pub fn render_trace(results: &[ExperimentResult]) -> Result<String> {
    let entries: Vec<TraceEntry> = results
        .iter()
        .flat_map(|r| {
            r.repeats.iter().filter_map(move |rep| {
                rep.diagnostics.as_ref().map(|d| TraceEntry {
                    format: &r.format,
                    repeat: rep.index,
                    residual_trace: &d.residual_trace,
                    ap_iterations: &d.ap_iterations,
                    objective_trace: d.objective_trace.as_deref(),
                })
            })
        })
        .collect();
    Ok(serde_json::to_string_pretty(&entries)?)
}

/// Writes the rendered results to `path`.
pub fn emit_results(results: &[ExperimentResult], format: OutputFormat, path: &Path) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => render_csv(results)?,
        OutputFormat::Json => render_json(results)?,
    };
    fs::write(path, text).map_err(|e| LlpError::io(path, e))
}
