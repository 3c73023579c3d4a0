//! Uniformity and entropy regularization.
//!
//! Two loss terms over intermediate features of a generative model:
//!
//! - the uniformity loss, the logarithm of the average pairwise Gaussian
//!   potential `exp(-gamma * ||x - y||^2)` over all distinct row pairs of a
//!   feature batch (rows L2-normalized first by default, inside the
//!   differentiable graph);
//! - the entropy surrogate, `0.5 * log Var(f / phi) + log phi` per feature
//!   row with `phi = max(||f||_2, floor)`, the Gaussian upper bound on the
//!   differential entropy of the feature distribution up to constants.
//!
//! Both come in a graph-building form (for training) and an
//! evaluation-only form (for metrics). The evaluation forms reduce in the
//! same fixed order as the graph forms so logged values are reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, NodeId, Tape};

/// Batch of tapped intermediate features.
#[derive(Debug, Clone)]
pub struct FeatureBatch {
    pub features: Matrix,
    pub layer_id: usize,
    /// Whether rows are already L2-normalized (within 1e-9).
    pub normalized: bool,
}

impl FeatureBatch {
    pub fn new(features: Matrix, layer_id: usize) -> Self {
        FeatureBatch {
            features,
            layer_id,
            normalized: false,
        }
    }

    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Weights and constants for the two regularizers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizerConfig {
    /// Gaussian kernel temperature.
    pub gamma: f64,
    /// Uniformity weight on generator-tapped features.
    pub lambda_g: f64,
    /// Uniformity weight on discriminator-tapped features.
    pub lambda_d: f64,
    /// Entropy weight on generator-tapped features.
    pub delta_g: f64,
    /// Entropy weight on discriminator-tapped features.
    pub delta_d: f64,
    /// Clamp floor for variances and rescaling norms.
    pub variance_floor: f64,
    /// L2-normalize rows before the uniformity loss.
    pub normalize_features: bool,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig {
            gamma: 2.0,
            lambda_g: 0.5,
            lambda_d: 0.5,
            delta_g: 0.1,
            delta_d: 0.1,
            variance_floor: 1e-12,
            normalize_features: true,
        }
    }
}

impl RegularizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.variance_floor <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "variance_floor must be positive, got {}",
                self.variance_floor
            )));
        }
        for (name, v) in [
            ("lambda_g", self.lambda_g),
            ("lambda_d", self.lambda_d),
            ("delta_g", self.delta_g),
            ("delta_d", self.delta_d),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Gaussian potential kernel `exp(-gamma * ||x - y||^2)`.
pub fn gaussian_potential(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape("gaussian_potential", x.len(), y.len()));
    }
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gaussian_potential: gamma must be positive, got {gamma}"
        )));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d2).exp())
}

/// Uniformity loss over a feature batch, as a graph node: the log of the
/// mean Gaussian potential over all M(M-1)/2 distinct row pairs. When
/// `normalize` is set the rows pass through in-graph L2 normalization first,
/// so gradients account for it.
pub fn uniformity_loss_node(
    tape: &mut Tape,
    features: NodeId,
    gamma: f64,
    normalize: bool,
    floor: f64,
) -> Result<NodeId> {
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "uniformity_loss: gamma must be positive, got {gamma}"
        )));
    }
    if tape.value(features).rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "uniformity_loss: need at least 2 rows, got {}",
            tape.value(features).rows()
        )));
    }
    let f = if normalize {
        tape.l2_normalize_rows(features, floor)?
    } else {
        features
    };
    let d2 = tape.pair_sqdist(f)?;
    let scaled = tape.scale(d2, -gamma);
    let pots = tape.exp(scaled);
    let mean = tape.mean(pots)?;
    tape.log(mean)
}

/// Entropy surrogate for every row of a feature batch, as an M x 1 graph
/// node: `0.5 * log(max(Var(f/phi), floor)) + log(phi)` with
/// `phi = max(||f||_2, floor)` and population variance over the row.
pub fn entropy_surrogate_node(tape: &mut Tape, features: NodeId, floor: f64) -> Result<NodeId> {
    if tape.value(features).cols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "entropy_surrogate: need at least 2 feature dimensions, got {}",
            tape.value(features).cols()
        )));
    }
    if floor <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "entropy_surrogate: variance_floor must be positive, got {floor}"
        )));
    }
    let ss = tape.row_sum_sq(features);
    let ss_clamped = tape.clamp_min(ss, floor * floor);
    let phi = tape.sqrt(ss_clamped)?;
    let inv_phi = tape.recip(phi)?;
    let rescaled = tape.scale_rows(features, inv_phi)?;
    let var = tape.row_var(rescaled)?;
    let var_clamped = tape.clamp_min(var, floor);
    let half_log_var = {
        let lv = tape.log(var_clamped)?;
        tape.scale(lv, 0.5)
    };
    let log_phi = tape.log(phi)?;
    tape.add(half_log_var, log_phi)
}

/// Mean of the per-row entropy surrogates, as a scalar graph node.
pub fn batch_entropy_node(tape: &mut Tape, features: NodeId, floor: f64) -> Result<NodeId> {
    if tape.value(features).rows() < 1 {
        return Err(Error::InvalidArgument(
            "batch_entropy: empty batch".to_string(),
        ));
    }
    let rows = entropy_surrogate_node(tape, features, floor)?;
    tape.mean(rows)
}

// ---- evaluation-only forms ----

/// Uniformity loss value without a tape. Matches the graph form bitwise on
/// the same input.
pub fn uniformity_loss_value(
    features: &Matrix,
    gamma: f64,
    normalize: bool,
    floor: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let f = tape.constant(features.clone());
    let node = uniformity_loss_node(&mut tape, f, gamma, normalize, floor)?;
    tape.value(node).scalar_value()
}

/// Entropy surrogate of a single feature row.
pub fn entropy_surrogate_value(row: &[f64], floor: f64) -> Result<f64> {
    let m = Matrix::from_vec(1, row.len(), row.to_vec())?;
    let mut tape = Tape::new();
    let f = tape.constant(m);
    let node = entropy_surrogate_node(&mut tape, f, floor)?;
    Ok(tape.value(node).get(0, 0))
}

/// Mean entropy surrogate over the rows of a batch.
pub fn batch_entropy_value(features: &Matrix, floor: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let f = tape.constant(features.clone());
    let node = batch_entropy_node(&mut tape, f, floor)?;
    tape.value(node).scalar_value()
}

/// Average pairwise Gaussian potential of L2-normalized rows: the
/// uniformity diagnostic (lower means more uniform). This is the mean, not
/// its logarithm.
pub fn pairwise_potential_metric(features: &Matrix, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "pairwise_potential_metric: gamma must be positive, got {gamma}"
        )));
    }
    let m = features.rows();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "pairwise_potential_metric: need at least 2 rows, got {m}"
        )));
    }
    let mut normalized = features.clone();
    for r in 0..m {
        let norm = normalized.row(r).iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        for v in normalized.row_mut(r) {
            *v /= norm;
        }
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            total += (-gamma * Matrix::row_sqdist(&normalized, i, &normalized, j)).exp();
        }
    }
    Ok(total / (m * (m - 1) / 2) as f64)
}

/// Mean pairwise Gaussian potential with rows taken as-is (no
/// normalization). Used by the sphere experiment where points are kept on
/// the sphere by projection.
pub fn mean_pair_potential_raw(points: &Matrix, gamma: f64) -> Result<f64> {
    let m = points.rows();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "mean_pair_potential: need at least 2 rows, got {m}"
        )));
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            total += (-gamma * Matrix::row_sqdist(points, i, points, j)).exp();
        }
    }
    Ok(total / (m * (m - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, ParameterSet, Rng};

    #[test]
    fn potential_of_identical_points_is_one() {
        let x = [0.3, -1.2, 0.7];
        assert_eq!(gaussian_potential(&x, &x, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn potential_of_antipodal_unit_pair() {
        // ||x - y||^2 = 4, gamma = 2 -> exp(-8)
        let v = gaussian_potential(&[1.0, 0.0], &[-1.0, 0.0], 2.0).unwrap();
        assert!((v - (-8.0f64).exp()).abs() < 1e-18);
        assert!((v - 3.3546e-4).abs() < 1e-7);
    }

    #[test]
    fn potential_inner_product_identity_on_unit_vectors() {
        // exp(-g ||x-y||^2) = exp(2 g x.y - 2 g) when ||x|| = ||y|| = 1.
        let mut rng = Rng::new(21);
        for _ in 0..50 {
            let m = rng.sample_uniform_sphere(2, 5).unwrap();
            let (x, y) = (m.row(0).to_vec(), m.row(1).to_vec());
            let gamma = 0.5 + 3.0 * rng.next_f64();
            let lhs = gaussian_potential(&x, &y, gamma).unwrap();
            let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs = (2.0 * gamma * dot - 2.0 * gamma).exp();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn potential_errors() {
        assert!(gaussian_potential(&[1.0], &[1.0, 2.0], 2.0).is_err());
        assert!(gaussian_potential(&[1.0], &[1.0], 0.0).is_err());
        assert!(gaussian_potential(&[1.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn uniformity_of_identical_rows_is_zero() {
        let f = Matrix::from_vec(2, 3, vec![0.2, 0.5, -0.1, 0.2, 0.5, -0.1]).unwrap();
        let v = uniformity_loss_value(&f, 2.0, false, 1e-12).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn uniformity_of_antipodal_pair() {
        let f = Matrix::from_vec(2, 2, vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        let v = uniformity_loss_value(&f, 2.0, true, 1e-12).unwrap();
        assert!((v + 8.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn uniformity_matches_pair_enumeration_oracle() {
        // Three rows: log of the mean of the 3 pair potentials.
        let mut rng = Rng::new(33);
        for _ in 0..20 {
            let f = rng.sample_normal(3, 4).unwrap();
            let got = uniformity_loss_value(&f, 2.0, false, 1e-12).unwrap();
            let pots = [
                gaussian_potential(f.row(0), f.row(1), 2.0).unwrap(),
                gaussian_potential(f.row(0), f.row(2), 2.0).unwrap(),
                gaussian_potential(f.row(1), f.row(2), 2.0).unwrap(),
            ];
            let expected = (pots.iter().sum::<f64>() / 3.0).ln();
            assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        }
    }

    #[test]
    fn uniformity_needs_two_rows() {
        let f = Matrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(uniformity_loss_value(&f, 2.0, true, 1e-12).is_err());
        assert!(pairwise_potential_metric(&f, 2.0).is_err());
    }

    #[test]
    fn surrogate_phi_compensation_is_exact_for_symmetric_pair() {
        // f = (-1, 1): phi = sqrt(2), Var(f/phi) = 1/2,
        // 0.5 log(1/2) + log sqrt(2) = 0 = 0.5 log Var(f).
        let v = entropy_surrogate_value(&[-1.0, 1.0], 1e-12).unwrap();
        assert!(v.abs() < 1e-15, "{v}");
    }

    #[test]
    fn surrogate_clamps_constant_rows() {
        let row = [3.0; 8];
        let v = entropy_surrogate_value(&row, 1e-12).unwrap();
        let phi = (8.0f64 * 9.0).sqrt();
        let expected = 0.5 * (1e-12f64).ln() + phi.ln();
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
        assert!(v.is_finite());
    }

    #[test]
    fn surrogate_matches_direct_variance_oracle() {
        let mut rng = Rng::new(55);
        for _ in 0..100 {
            let row: Vec<f64> = (0..16).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
            let got = entropy_surrogate_value(&row, 1e-12).unwrap();
            let mu = row.iter().sum::<f64>() / 16.0;
            let var = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / 16.0;
            let expected = 0.5 * var.ln();
            assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
        }
    }

    #[test]
    fn surrogate_needs_two_dims() {
        assert!(entropy_surrogate_value(&[1.0], 1e-12).is_err());
    }

    #[test]
    fn surrogate_scaling_law() {
        // surrogate(a f) = surrogate(f) + log |a| for a != 0.
        let mut rng = Rng::new(56);
        for _ in 0..50 {
            let row: Vec<f64> = (0..12).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
            let a = 4.0 * rng.next_f64() - 2.0;
            if a.abs() < 1e-3 {
                continue;
            }
            let base = entropy_surrogate_value(&row, 1e-12).unwrap();
            let scaled_row: Vec<f64> = row.iter().map(|x| a * x).collect();
            let scaled = entropy_surrogate_value(&scaled_row, 1e-12).unwrap();
            assert!(
                (scaled - base - a.abs().ln()).abs() < 1e-9,
                "a={a}: {scaled} vs {base}"
            );
        }
    }

    #[test]
    fn surrogate_invariant_to_rescaling_constant() {
        // 0.5 log(Var(f/phi')) + log phi' = 0.5 log Var(f) for any phi' > 0.
        let mut rng = Rng::new(57);
        for _ in 0..50 {
            let row: Vec<f64> = (0..10).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
            let phi_alt = 0.1 + 5.0 * rng.next_f64();
            let rescaled: Vec<f64> = row.iter().map(|x| x / phi_alt).collect();
            let mu = rescaled.iter().sum::<f64>() / 10.0;
            let var = rescaled.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / 10.0;
            let with_alt = 0.5 * var.ln() + phi_alt.ln();
            let reference = entropy_surrogate_value(&row, 1e-12).unwrap();
            assert!((with_alt - reference).abs() < 1e-9, "{with_alt} vs {reference}");
        }
    }

    #[test]
    fn surrogate_attains_gaussian_bound_for_fixed_variance() {
        // Rows with the same population variance get the same surrogate,
        // 0.5 log v, regardless of shape.
        let target_var = 0.37;
        let shapes: Vec<Vec<f64>> = vec![
            vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0],                // two-point
            vec![-2.0, -1.0, 0.0, 1.0, 2.0, 0.0],                 // ramp
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 3.0],                   // spike
            vec![0.3, -1.4, 0.9, 2.2, -0.5, -1.5],                // irregular
        ];
        for base in shapes {
            let d = base.len() as f64;
            let mu = base.iter().sum::<f64>() / d;
            let var = base.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / d;
            let scale = (target_var / var).sqrt();
            let row: Vec<f64> = base.iter().map(|x| x * scale).collect();
            let got = entropy_surrogate_value(&row, 1e-12).unwrap();
            let expected = 0.5 * target_var.ln();
            assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        }
    }

    #[test]
    fn batch_entropy_examples() {
        let mut rng = Rng::new(58);
        let row = rng.sample_normal(1, 16).unwrap();
        let single = batch_entropy_value(&row, 1e-12).unwrap();
        assert_eq!(single, entropy_surrogate_value(row.row(0), 1e-12).unwrap());

        let mut stacked_rows = Vec::new();
        for _ in 0..4 {
            stacked_rows.push(row.row(0).to_vec());
        }
        let stacked = Matrix::from_rows(&stacked_rows).unwrap();
        let repeated = batch_entropy_value(&stacked, 1e-12).unwrap();
        assert!((repeated - single).abs() < 1e-12);

        let batch = rng.sample_normal(8, 16).unwrap();
        let got = batch_entropy_value(&batch, 1e-12).unwrap();
        let mut expected = 0.0;
        for r in 0..8 {
            expected += entropy_surrogate_value(batch.row(r), 1e-12).unwrap();
        }
        expected /= 8.0;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn pairwise_metric_examples() {
        let anti = Matrix::from_vec(2, 2, vec![0.0, 1.0, 0.0, -1.0]).unwrap();
        let v = pairwise_potential_metric(&anti, 2.0).unwrap();
        assert!((v - (-8.0f64).exp()).abs() < 1e-15);

        let same = Matrix::from_vec(3, 2, vec![0.6, 0.8, 0.6, 0.8, 0.6, 0.8]).unwrap();
        assert_eq!(pairwise_potential_metric(&same, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn pairwise_metric_on_uniform_circle_matches_quadrature() {
        // E exp(-4 + 4 cos t) = exp(-4) I0(4) by quadrature.
        let quad = {
            let n = 200_000;
            let mut acc = 0.0;
            for k in 0..n {
                let t = std::f64::consts::TAU * (k as f64 + 0.5) / n as f64;
                acc += (-4.0 + 4.0 * t.cos()).exp();
            }
            acc / n as f64
        };
        assert!((quad - 0.2070).abs() < 1e-3, "quadrature {quad}");
        let mut rng = Rng::new(60);
        let pts = rng.sample_uniform_sphere(100, 2).unwrap();
        let v = pairwise_potential_metric(&pts, 2.0).unwrap();
        assert!((v - quad).abs() < 0.03, "metric {v} vs quadrature {quad}");
    }

    #[test]
    fn uniformity_invariances() {
        let mut rng = Rng::new(61);
        let f = rng.sample_normal(6, 4).unwrap();
        let base = uniformity_loss_value(&f, 2.0, true, 1e-12).unwrap();

        // Row permutation.
        let perm = [3, 0, 5, 1, 4, 2];
        let permuted = Matrix::from_rows(&perm.iter().map(|&i| f.row(i).to_vec()).collect::<Vec<_>>()).unwrap();
        let v = uniformity_loss_value(&permuted, 2.0, true, 1e-12).unwrap();
        assert!((v - base).abs() < 1e-10);

        // Common orthogonal rotation (Gram-Schmidt of a random matrix).
        let q = random_orthogonal(4, &mut rng);
        let rotated = f.matmul(&q).unwrap();
        let v = uniformity_loss_value(&rotated, 2.0, true, 1e-12).unwrap();
        assert!((v - base).abs() < 1e-10, "{v} vs {base}");
    }

    #[test]
    fn graph_and_eval_forms_agree_bitwise() {
        let mut rng = Rng::new(62);
        let f = rng.sample_normal(5, 3).unwrap();
        let eval = uniformity_loss_value(&f, 2.0, true, 1e-12).unwrap();
        let mut tape = Tape::new();
        let node = tape.leaf(f.clone());
        let loss = uniformity_loss_node(&mut tape, node, 2.0, true, 1e-12).unwrap();
        assert_eq!(eval.to_bits(), tape.value(loss).scalar_value().unwrap().to_bits());

        let be = batch_entropy_value(&f, 1e-12).unwrap();
        let mut tape = Tape::new();
        let node = tape.leaf(f.clone());
        let benode = batch_entropy_node(&mut tape, node, 1e-12).unwrap();
        assert_eq!(be.to_bits(), tape.value(benode).scalar_value().unwrap().to_bits());
    }

    #[test]
    fn uniformity_gradient_passes_finite_differences() {
        let mut rng = Rng::new(63);
        for inst in 0..100 {
            let f0 = rng.sample_normal(8, 4).unwrap();
            let eval = |theta: &ParameterSet| -> crate::error::Result<f64> {
                let mut tape = Tape::new();
                let f = tape.leaf(theta.get(0).1.clone());
                let loss = uniformity_loss_node(&mut tape, f, 2.0, true, 1e-12)?;
                tape.value(loss).scalar_value()
            };
            let mut tape = Tape::new();
            let f = tape.leaf(f0.clone());
            let loss = uniformity_loss_node(&mut tape, f, 2.0, true, 1e-12).unwrap();
            tape.backward(loss).unwrap();
            let mut theta = ParameterSet::new();
            theta.push("f", f0.clone());
            let mut analytic = ParameterSet::new();
            analytic.push("f", tape.grad(f).clone());
            let err = finite_diff_check(eval, &theta, &analytic, 1e-5).unwrap();
            assert!(err < 1e-4, "instance {inst}: {err:.3e}");
        }
    }

    #[test]
    fn batch_entropy_gradient_passes_finite_differences() {
        let mut rng = Rng::new(64);
        for inst in 0..100 {
            let f0 = rng.sample_normal(1, 16).unwrap();
            let eval = |theta: &ParameterSet| -> crate::error::Result<f64> {
                let mut tape = Tape::new();
                let f = tape.leaf(theta.get(0).1.clone());
                let loss = batch_entropy_node(&mut tape, f, 1e-12)?;
                tape.value(loss).scalar_value()
            };
            let mut tape = Tape::new();
            let f = tape.leaf(f0.clone());
            let loss = batch_entropy_node(&mut tape, f, 1e-12).unwrap();
            tape.backward(loss).unwrap();
            let mut theta = ParameterSet::new();
            theta.push("f", f0.clone());
            let mut analytic = ParameterSet::new();
            analytic.push("f", tape.grad(f).clone());
            let err = finite_diff_check(eval, &theta, &analytic, 1e-5).unwrap();
            assert!(err < 1e-4, "instance {inst}: {err:.3e}");
        }
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = RegularizerConfig::default();
        assert_eq!(cfg.gamma, 2.0);
        assert_eq!(cfg.lambda_g, 0.5);
        assert_eq!(cfg.lambda_d, 0.5);
        assert_eq!(cfg.delta_g, 0.1);
        assert_eq!(cfg.delta_d, 0.1);
        assert!(cfg.validate().is_ok());
        let bad = RegularizerConfig {
            gamma: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    pub(crate) fn random_orthogonal(d: usize, rng: &mut Rng) -> Matrix {
        // Gram-Schmidt on a random Gaussian matrix.
        let raw = rng.sample_normal(d, d).unwrap();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for c in 0..d {
            let mut v: Vec<f64> = (0..d).map(|r| raw.get(r, c)).collect();
            for prev in &cols {
                let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= dot * pi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for vi in &mut v {
                *vi /= norm;
            }
            cols.push(v);
        }
        let mut q = Matrix::zeros(d, d);
        for (c, col) in cols.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                q.set(r, c, v);
            }
        }
        q
    }
}
