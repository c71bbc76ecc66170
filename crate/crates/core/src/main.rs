use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lp_llp::datagen::{assign_bags, gen_half_kernel, gen_xor, BagConfig, BagSpec, HalfKernelParams};
use lp_llp::experiment::{
    emit_results, parse_formats, render_trace, run_experiment, run_sweep, ExperimentConfig,
    ExperimentResult, OutputFormat,
};
use lp_llp::{LlpError, Result, RngSeed};

#[derive(Parser)]
#[command(name = "llp", version, about = "Label propagation for learning with label proportions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Xor,
    HalfKernel,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV and its bag CSV.
    Generate {
        #[arg(long, value_enum)]
        dataset: DatasetKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bag proportion configuration (A or B).
        #[arg(long, default_value = "B")]
        bags: String,
        #[arg(long, default_value_t = HalfKernelParams::default().noise_sd)]
        noise_sd: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write trace.json with per-repeat residual/objective traces.
        #[arg(long)]
        trace: bool,
        /// Score every instance, not only the test bag.
        #[arg(long)]
        eval_all: bool,
    },
    /// Run a config once per format code, e.g. 120A,120B,600B.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        formats: String,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        trace: bool,
    },
}

fn generate(kind: DatasetKind, n: usize, seed: u64, bags: &str, noise_sd: f64, out: &Path) -> Result<()> {
    let seed = RngSeed(seed);
    let dataset = match kind {
        DatasetKind::Xor => gen_xor(n, seed.derive(0))?,
        DatasetKind::HalfKernel => {
            let params = HalfKernelParams {
                noise_sd,
                ..Default::default()
            };
            gen_half_kernel(n, params, seed.derive(0))?
        }
    };
    let config = BagConfig::from_code(bags)
        .ok_or_else(|| LlpError::Config(format!("unknown bag configuration {bags:?}")))?;
    let spec = BagSpec::equal_sizes(config.positive_proportions(), n)?;
    let structure = assign_bags(&dataset, &spec, seed.derive(1))?;
    fs::create_dir_all(out).map_err(|e| LlpError::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    dataset.write_csv(&out.join("dataset.csv"))?;
    structure.write_csv(&out.join("bags.csv"))?;
    eprintln!(
        "wrote {} instances in {} bags to {}",
        dataset.n(),
        structure.n_bags(),
        out.display()
    );
    Ok(())
}

fn write_outputs(results: &[ExperimentResult], out: &Path, trace: bool) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| LlpError::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    emit_results(results, OutputFormat::Csv, &out.join("results.csv"))?;
    emit_results(results, OutputFormat::Json, &out.join("results.json"))?;
    if trace {
        let path = out.join("trace.json");
        fs::write(&path, render_trace(results)?).map_err(|e| LlpError::Io { path, source: e })?;
    }
    for r in results {
        eprintln!(
            "{} {}: {} ({} of {} repeats, {:.1}s)",
            r.dataset,
            r.format,
            lp_llp::experiment::format_cell(r.mean, r.std),
            r.completed,
            r.repeats.len(),
            r.wall_time.as_secs_f64()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            dataset,
            n,
            seed,
            bags,
            noise_sd,
            out,
        } => generate(dataset, n, seed, &bags, noise_sd, &out),
        Command::Run {
            config,
            out,
            trace,
            eval_all,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            config.eval_all |= eval_all;
            let result = run_experiment(&config)?;
            write_outputs(&[result], &out, trace)
        }
        Command::Sweep {
            config,
            formats,
            out,
            trace,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let results = run_sweep(&config, &parse_formats(&formats)?)?;
            write_outputs(&results, &out, trace)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
