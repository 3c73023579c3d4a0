//! Sphere uniformity descent and the sine/cosine circle map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Tape};
use crate::regularizers::mean_pair_potential_raw;

/// Map each element `a_i` of a vector to the point `(sin a_i, cos a_i)` on
/// the unit circle. Returns a d x 2 matrix of unit rows.
pub fn sincos_map(avg_feature: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(avg_feature.len(), 2);
    for (i, &a) in avg_feature.iter().enumerate() {
        out.set(i, 0, a.sin());
        out.set(i, 1, a.cos());
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SphereExperimentConfig {
    /// Number of points.
    pub n_points: usize,
    /// Sphere dimension d; points live in ambient dimension d + 1.
    pub sphere_dim: usize,
    pub gamma: f64,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Independent uniform samples for the baseline estimate.
    pub baseline_trials: usize,
}

impl Default for SphereExperimentConfig {
    fn default() -> Self {
        SphereExperimentConfig {
            n_points: 100,
            sphere_dim: 1,
            gamma: 2.0,
            steps: 300,
            step_size: 1.0,
            seed: 0,
            baseline_trials: 20,
        }
    }
}

impl SphereExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::InvalidArgument(format!(
                "sphere experiment: need at least 2 points, got {}",
                self.n_points
            )));
        }
        if self.sphere_dim == 0 {
            return Err(Error::InvalidArgument(
                "sphere experiment: sphere_dim must be positive".to_string(),
            ));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sphere experiment: gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.baseline_trials == 0 {
            return Err(Error::InvalidArgument(
                "sphere experiment: baseline_trials must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereExperimentReport {
    pub final_potential: f64,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    /// Mean distinct-pair potential after each accepted step, starting with
    /// the initial configuration.
    pub trajectory: Vec<f64>,
    pub accepted_steps: usize,
}

/// Projected gradient descent on `n` points constrained to the sphere,
/// minimizing the mean distinct-pair Gaussian potential. Steps that fail to
/// decrease the potential shrink by backtracking halving; the trajectory is
/// therefore nonincreasing. The baseline is the potential of independent
/// uniform samples of the same size.
pub fn sphere_uniformity_experiment(cfg: &SphereExperimentConfig) -> Result<SphereExperimentReport> {
    cfg.validate()?;
    let ambient = cfg.sphere_dim + 1;
    let master = Rng::new(cfg.seed);

    let mut points = Rng::new(cfg.seed).sample_uniform_sphere(cfg.n_points, ambient)?;
    let mut potential = mean_pair_potential_raw(&points, cfg.gamma)?;
    let mut trajectory = vec![potential];
    let mut accepted = 0;

    // Step size grows on acceptance and backtracks by halving otherwise,
    // so descent stays fast on the flat approach to an optimum while every
    // accepted step still decreases the potential.
    let mut eta = cfg.step_size;
    for _step in 0..cfg.steps {
        let grad = potential_gradient(&points, cfg.gamma)?;
        let mut moved = false;
        for _ in 0..60 {
            let candidate = retract(&points, &grad, eta);
            let cand_potential = mean_pair_potential_raw(&candidate, cfg.gamma)?;
            if !cand_potential.is_finite() {
                return Err(Error::Diverged {
                    step: accepted,
                    msg: "non-finite potential during descent".to_string(),
                });
            }
            if cand_potential < potential {
                points = candidate;
                potential = cand_potential;
                trajectory.push(potential);
                accepted += 1;
                moved = true;
                eta = (eta * 2.0).min(1e9);
                break;
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
    }

    // Baseline over independent uniform configurations.
    let mut baseline = Vec::with_capacity(cfg.baseline_trials);
    for t in 0..cfg.baseline_trials {
        let mut trial_rng = master.substream(1000 + t as u64);
        let sample = trial_rng.sample_uniform_sphere(cfg.n_points, ambient)?;
        baseline.push(mean_pair_potential_raw(&sample, cfg.gamma)?);
    }
    let mean = baseline.iter().sum::<f64>() / baseline.len() as f64;
    let var = baseline.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / baseline.len() as f64;

    Ok(SphereExperimentReport {
        final_potential: potential,
        baseline_mean: mean,
        baseline_std: var.sqrt(),
        trajectory,
        accepted_steps: accepted,
    })
}

/// Gradient of the mean distinct-pair potential with respect to the point
/// matrix, from the differentiation tape.
fn potential_gradient(points: &Matrix, gamma: f64) -> Result<Matrix> {
    let mut tape = Tape::new();
    let x = tape.leaf(points.clone());
    let d2 = tape.pair_sqdist(x)?;
    let scaled = tape.scale(d2, -gamma);
    let pots = tape.exp(scaled);
    let loss = tape.mean(pots)?;
    tape.backward(loss)?;
    Ok(tape.grad(x).clone())
}

/// Step along the negative gradient, then renormalize each row to the
/// sphere.
fn retract(points: &Matrix, grad: &Matrix, eta: f64) -> Matrix {
    let mut out = points.clone();
    for r in 0..out.rows() {
        for (o, &g) in out.row_mut(r).iter_mut().zip(grad.row(r)) {
            *o -= eta * g;
        }
        let norm = out.row(r).iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        for o in out.row_mut(r) {
            *o /= norm;
        }
    }
    out
}
