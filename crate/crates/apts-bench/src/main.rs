use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use apts::data::{Dataset, Targets};
use apts::matrix::Matrix;
use apts::net::NetObjective;
use apts::objective::{finite_diff_grad, BatchRef, Objective};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use apts_bench::config::load_config;
use apts_bench::modelspec::parse_model_spec;
use apts_bench::report::{compare_report, load_metrics_csv};
use apts_bench::runner::run_experiment;
use apts_bench::HarnessError;

#[derive(Parser)]
#[command(
    name = "apts-bench",
    version,
    about = "Benchmark runner for additively preconditioned trust-region optimizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its metrics CSV.
    Run {
        /// Path to a `key = value` run config.
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long, value_name = "SEED")]
        seed_override: Option<u64>,
        /// Replace the config's epoch count.
        #[arg(long, value_name = "N")]
        epochs: Option<u64>,
        /// Replace the config's output path.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Print a side-by-side comparison of metrics CSVs.
    Compare {
        /// CSV files produced by `run`.
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Compare analytic network gradients against central differences.
    Gradcheck {
        /// Model description like `2x16x2`, `4x8x3:relu`, or `8x4x1:mse`.
        model: String,
        /// Random samples in the probe dataset.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Seed for the probe data and the initial parameters.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Tightest max relative error gradcheck accepts as a pass.
const GRADCHECK_TOLERANCE: f64 = 1e-5;

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run {
            config,
            seed_override,
            epochs,
            output,
        } => cmd_run(&config, seed_override, epochs, output),
        Command::Compare { csv } => cmd_compare(&csv),
        Command::Gradcheck {
            model,
            samples,
            seed,
        } => cmd_gradcheck(&model, samples, seed),
    }
}

fn cmd_run(
    config: &PathBuf,
    seed_override: Option<u64>,
    epochs: Option<u64>,
    output: Option<PathBuf>,
) -> Result<ExitCode, HarnessError> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed_override {
        cfg.seeds = vec![seed];
    }
    if let Some(epochs) = epochs {
        cfg.epochs = epochs;
    }
    if let Some(output) = output {
        cfg.output = output;
    }

    let summary = run_experiment(&cfg)?;
    println!(
        "wrote {}: {} seed(s) x {} epochs",
        cfg.output.display(),
        summary.per_seed_final.len(),
        summary.epochs
    );
    for (seed, loss, acc) in &summary.per_seed_final {
        if acc.is_nan() {
            println!("  seed {seed}: final loss {loss:.9}");
        } else {
            println!("  seed {seed}: final loss {loss:.9}, accuracy {acc:.6}");
        }
    }
    if summary.mean_final_accuracy.is_nan() {
        println!("mean final loss {:.9}", summary.mean_final_loss);
    } else {
        println!(
            "mean final loss {:.9}, accuracy {:.6}",
            summary.mean_final_loss, summary.mean_final_accuracy
        );
    }
    println!("total wall time {:.3}s", summary.total_wall_s);

    if summary.failed_seeds.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for (seed, message) in &summary.failed_seeds {
            eprintln!("seed {seed} failed: {message}");
        }
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_compare(paths: &[PathBuf]) -> Result<ExitCode, HarnessError> {
    let mut files = Vec::with_capacity(paths.len());
    for path in paths {
        files.push(load_metrics_csv(path)?);
    }
    print!("{}", compare_report(&files)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_gradcheck(model: &str, samples: usize, seed: u64) -> Result<ExitCode, HarnessError> {
    if samples == 0 {
        return Err(HarnessError::Invalid("--samples must be at least 1".into()));
    }
    let parsed = parse_model_spec(model)?;
    let spec = parsed.spec;
    let in_dim = spec.input_dim();
    let out_dim = spec.output_dim();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(samples * in_dim);
    for _ in 0..samples * in_dim {
        inputs.push(rng.random_range(-1.0..1.0));
    }
    let inputs = Matrix::from_vec(samples, in_dim, inputs)?;
    let targets = if parsed.mse_head {
        let mut values = Vec::with_capacity(samples * out_dim);
        for _ in 0..samples * out_dim {
            values.push(rng.random_range(-1.0..1.0));
        }
        Targets::Values(Matrix::from_vec(samples, out_dim, values)?)
    } else {
        let labels = (0..samples).map(|_| rng.random_range(0..out_dim)).collect();
        Targets::Labels {
            labels,
            classes: out_dim,
        }
    };
    let data = Arc::new(Dataset::new(inputs, targets)?);
    let obj = NetObjective::new(spec.clone(), data)?;

    let theta = spec.init_params(seed);
    let (_, analytic) = obj.eval(&theta, &BatchRef::Full)?;
    let numeric = finite_diff_grad(&obj, &theta, &BatchRef::Full, 1e-6)?;

    let mut max_rel = 0.0f64;
    for (a, n) in analytic.as_slice().iter().zip(numeric.as_slice()) {
        let rel = (a - n).abs() / a.abs().max(1.0);
        max_rel = max_rel.max(rel);
    }

    let verdict = if max_rel < GRADCHECK_TOLERANCE {
        "PASS"
    } else {
        "FAIL"
    };
    println!(
        "gradcheck {model}: params={} samples={samples} max_rel_err={max_rel:.3e} {verdict}",
        spec.param_count()
    );
    Ok(if verdict == "PASS" {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
