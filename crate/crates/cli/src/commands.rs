//! Subcommand implementations.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use unigan::analysis::{sphere_uniformity_experiment, SphereExperimentConfig};
use unigan::data::{load_features, save_dataset};
use unigan::gan::{train, GeneratorLossMode};
use unigan::regularizers::{
    batch_entropy_value, entropy_surrogate_value, pairwise_potential_metric,
};
use unigan::scm::scm_bench;
use unigan::verification::run_gradient_suite;

use crate::config::{load_toml, resolve_out_dir, write_run_stamp, ScmRunFile, TrainRunFile};

pub fn train_gan(config_path: &Path, out: Option<&Path>, no_ur: bool, no_er: bool) -> Result<()> {
    let mut run: TrainRunFile = load_toml(config_path)?;
    if no_ur {
        run.gan.regularizer.lambda_g = 0.0;
        run.gan.regularizer.lambda_d = 0.0;
    }
    if no_er {
        run.gan.regularizer.delta_g = 0.0;
        run.gan.regularizer.delta_d = 0.0;
    }
    let out_dir = resolve_out_dir(out, run.out_dir.as_deref())?;
    let resolved = TrainRunFile {
        out_dir: Some(out_dir.clone()),
        ..run.clone()
    };
    write_run_stamp(&out_dir, &resolved)?;
    let dataset = run.data.build()?;
    let summary = train(&run.gan, &dataset, &out_dir, GeneratorLossMode::Composed)?;
    let report = json!({
        "run_dir": summary.run_dir,
        "steps_completed": summary.steps_completed,
        "final_record": summary.final_record,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn eval_features(input: &Path, gamma: f64) -> Result<()> {
    if gamma <= 0.0 {
        bail!("usage error: --gamma must be positive, got {gamma}");
    }
    let features = load_features(input)?;
    let pairwise = pairwise_potential_metric(&features, gamma)?;
    let mean_surrogate = batch_entropy_value(&features, 1e-12)?;
    let avg_feature: Vec<f64> = (0..features.cols())
        .map(|c| {
            (0..features.rows()).map(|r| features.get(r, c)).sum::<f64>() / features.rows() as f64
        })
        .collect();
    let avg_entropy = entropy_surrogate_value(&avg_feature, 1e-12)?;
    let report = json!({
        "input": input,
        "rows": features.rows(),
        "dim": features.cols(),
        "gamma": gamma,
        "pairwise_potential": pairwise,
        "mean_entropy_surrogate": mean_surrogate,
        "avg_feature_entropy": avg_entropy,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn scm_bench_cmd(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let run: ScmRunFile = load_toml(config_path)?;
    let out_dir = resolve_out_dir(out, run.out_dir.as_deref())?;
    let resolved = ScmRunFile {
        out_dir: Some(out_dir.clone()),
        ..run.clone()
    };
    write_run_stamp(&out_dir, &resolved)?;
    let report = scm_bench(&run.bench)?;
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(out_dir.join("report.json"), &text)?;
    println!("{text}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn sphere_uniformity(
    n: usize,
    d: usize,
    gamma: f64,
    steps: usize,
    seed: u64,
    baseline_trials: usize,
    out: Option<&Path>,
) -> Result<()> {
    if gamma <= 0.0 {
        bail!("usage error: --gamma must be positive, got {gamma}");
    }
    if n < 2 {
        bail!("usage error: --n must be at least 2, got {n}");
    }
    let cfg = SphereExperimentConfig {
        n_points: n,
        sphere_dim: d,
        gamma,
        steps,
        seed,
        baseline_trials,
        ..Default::default()
    };
    let report = sphere_uniformity_experiment(&cfg)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_run_stamp(dir, &cfg)?;
        let mut csv = String::from("step,potential\n");
        for (i, p) in report.trajectory.iter().enumerate() {
            csv.push_str(&format!("{i},{p:.16e}\n"));
        }
        fs::write(dir.join("trajectory.csv"), csv)?;
        fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
    }
    let summary = json!({
        "config": cfg,
        "final_potential": report.final_potential,
        "baseline_mean": report.baseline_mean,
        "baseline_std": report.baseline_std,
        "accepted_steps": report.accepted_steps,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn make_data_ring(
    modes: usize,
    radius: f64,
    sigma: f64,
    n_per_mode: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let ds = unigan::data::make_ring(modes, radius, sigma, n_per_mode, seed)?;
    save_dataset(out, &ds).context("writing dataset")?;
    println!(
        "{}",
        json!({"out": out, "points": ds.len(), "modes": ds.n_modes()})
    );
    Ok(())
}

pub fn make_data_grid(
    side: usize,
    spacing: f64,
    sigma: f64,
    n_per_mode: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let ds = unigan::data::make_grid(side, spacing, sigma, n_per_mode, seed)?;
    save_dataset(out, &ds).context("writing dataset")?;
    println!(
        "{}",
        json!({"out": out, "points": ds.len(), "modes": ds.n_modes()})
    );
    Ok(())
}

pub fn gradcheck(instances: usize, seed: u64) -> Result<()> {
    if instances == 0 {
        bail!("usage error: --instances must be positive");
    }
    let results = run_gradient_suite(instances, seed)?;
    let mut all_pass = true;
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} {name} max_rel_err={err:.3e} tol={tol:.1e} instances={n}",
            name = r.name,
            err = r.max_rel_err,
            tol = r.tolerance,
            n = r.instances
        );
        all_pass &= r.pass;
    }
    println!("{}", serde_json::to_string(&results)?);
    if !all_pass {
        bail!("gradient checks failed");
    }
    Ok(())
}
