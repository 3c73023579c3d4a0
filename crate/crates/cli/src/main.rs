//! Command-line front end for training, diagnostics, and benchmarks.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "unigan", version, about = "Uniformity and entropy regularized GAN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Train a GAN from a config file, writing a run directory.
    TrainGan {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Disable uniformity regularization (forces lambda_g = lambda_d = 0).
        #[arg(long)]
        no_ur: bool,
        /// Disable entropy regularization (forces delta_g = delta_d = 0).
        #[arg(long)]
        no_er: bool,
    },
    /// Print pairwise-potential and entropy metrics of a feature CSV as JSON.
    EvalFeatures {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
    },
    /// Run the counterfactual identifiability benchmark from a config file.
    ScmBench {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize the pairwise Gaussian potential of n points on a sphere and
    /// compare against uniform baselines; prints a JSON report.
    SphereUniformity {
        #[arg(long)]
        n: usize,
        /// Sphere dimension d (points live in d + 1 coordinates).
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 300)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        baseline_trials: usize,
        /// Optional directory for the trajectory CSV and report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset CSV.
    MakeData {
        #[command(subcommand)]
        shape: DataShape,
    },
    /// Run the finite-difference gradient suite; nonzero exit on failure.
    Gradcheck {
        /// Random instances per check.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum DataShape {
    /// Gaussian modes equally spaced on a circle.
    Ring {
        #[arg(long, default_value_t = 8)]
        modes: usize,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 100)]
        n_per_mode: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gaussian modes on a square lattice.
    Grid {
        #[arg(long, default_value_t = 3)]
        side: usize,
        #[arg(long, default_value_t = 2.0)]
        spacing: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 100)]
        n_per_mode: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Commands::TrainGan {
            config,
            out,
            no_ur,
            no_er,
        } => commands::train_gan(&config, out.as_deref(), no_ur, no_er),
        Commands::EvalFeatures { input, gamma } => commands::eval_features(&input, gamma),
        Commands::ScmBench { config, out } => commands::scm_bench_cmd(&config, out.as_deref()),
        Commands::SphereUniformity {
            n,
            d,
            gamma,
            steps,
            seed,
            baseline_trials,
            out,
        } => commands::sphere_uniformity(n, d, gamma, steps, seed, baseline_trials, out.as_deref()),
        Commands::MakeData { shape } => match shape {
            DataShape::Ring {
                modes,
                radius,
                sigma,
                n_per_mode,
                seed,
                out,
            } => commands::make_data_ring(modes, radius, sigma, n_per_mode, seed, &out),
            DataShape::Grid {
                side,
                spacing,
                sigma,
                n_per_mode,
                seed,
                out,
            } => commands::make_data_grid(side, spacing, sigma, n_per_mode, seed, &out),
        },
        Commands::Gradcheck { instances, seed } => commands::gradcheck(instances, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
