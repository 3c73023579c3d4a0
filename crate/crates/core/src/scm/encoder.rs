//! Encoder trained on pair alignment plus output entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{Activation, MlpNetwork};
use crate::numerics::{Matrix, NodeId, Rng, Tape};
use crate::regularizers::uniformity_loss_node;
use crate::scm::stats::knn_entropy;
use crate::scm::PairSet;

/// How the output-entropy term enters the objective.
///
/// The uniformity proxy is differentiable and drives training; the
/// Kozachenko-Leonenko estimate is evaluation-grade and contributes no
/// gradient, leaving alignment-only training with entropy monitoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyEstimator {
    UniformityProxy,
    Knn,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AlignMaxConfig {
    pub encoder_hidden: Vec<usize>,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Weight on the uniformity proxy standing in for the entropy term.
    pub uniformity_weight: f64,
    pub entropy_estimator: EntropyEstimator,
    /// Angle multiplier of the circle lift `u -> (sin a u, cos a u)`. The
    /// full-circle value `2 pi` makes the uniform distribution on (0, 1)
    /// the exact minimizer of the lifted pair energy.
    pub angle_factor: f64,
    /// Final learning-rate fraction; the rate decays geometrically to
    /// `lr * lr_decay` across training, damping minibatch noise so the
    /// alignment term can settle.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for AlignMaxConfig {
    fn default() -> Self {
        AlignMaxConfig {
            encoder_hidden: vec![64, 64],
            steps: 3000,
            batch_size: 256,
            lr: 1e-3,
            uniformity_weight: 1.0,
            entropy_estimator: EntropyEstimator::UniformityProxy,
            angle_factor: std::f64::consts::TAU,
            lr_decay: 0.01,
            seed: 0,
        }
    }
}

impl AlignMaxConfig {
    pub fn validate(&self, d_c: usize) -> Result<()> {
        if self.encoder_hidden.is_empty() {
            return Err(Error::InvalidArgument(
                "encoder needs at least one hidden layer".to_string(),
            ));
        }
        if self.batch_size < 2 * d_c.max(1) {
            return Err(Error::InvalidArgument(format!(
                "batch_size {} too small: need at least 2 d_c = {}",
                self.batch_size,
                2 * d_c
            )));
        }
        if self.lr <= 0.0 || self.uniformity_weight < 0.0 || self.angle_factor <= 0.0 {
            return Err(Error::InvalidArgument(
                "lr and angle_factor must be positive, uniformity_weight nonnegative".to_string(),
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lr_decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        Ok(())
    }
}

/// MLP composed with a logistic output squashing into the open unit cube.
#[derive(Debug, Clone)]
pub struct Encoder {
    net: MlpNetwork,
}

impl Encoder {
    pub fn network(&self) -> &MlpNetwork {
        &self.net
    }

    /// Encode a batch of observations into `(0, 1)^{d_c}`.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        let (out, _) = self.net.forward_values(x)?;
        Ok(out.map(|v| 1.0 / (1.0 + (-v).exp())))
    }

    fn encode_graph(&self, tape: &mut Tape, x: NodeId, params: &(Vec<NodeId>, Vec<NodeId>)) -> Result<NodeId> {
        let fwd = self.net.forward_graph_with(tape, x, params)?;
        Ok(tape.sigmoid(fwd.output))
    }
}

/// Mean squared pair distance of encoded outputs, the alignment term.
pub fn alignment_value(encoder: &Encoder, pairs: &PairSet) -> Result<f64> {
    let u = encoder.encode(&pairs.x)?;
    let ut = encoder.encode(&pairs.x_tilde)?;
    let n = u.rows();
    let mut total = 0.0;
    for r in 0..n {
        total += Matrix::row_sqdist(&u, r, &ut, r);
    }
    Ok(total / n as f64)
}

/// Coordinatewise circle lift `(sin a u, cos a u) / sqrt(d)` of an
/// M x d node, landing on the unit sphere in 2d dimensions.
fn circle_lift(tape: &mut Tape, u: NodeId, angle: f64) -> Result<NodeId> {
    let d = tape.value(u).cols() as f64;
    let scaled = tape.scale(u, angle);
    let s = tape.sin(scaled);
    let c = tape.cos(scaled);
    let lifted = tape.hconcat(s, c)?;
    Ok(tape.scale(lifted, 1.0 / d.sqrt()))
}

/// Energy distance of a column of values to the uniform distribution on
/// (0, 1): `2 E[u^2 - u + 1/2] - E|u - u'| - 1/3`, built from tape
/// operators. Nonnegative in the population limit and zero exactly at
/// uniform, so minimizing it pins the marginal with no wrap-around
/// ambiguity.
fn energy_distance_to_uniform(tape: &mut Tape, column: NodeId) -> Result<NodeId> {
    let sq = tape.mul(column, column)?;
    let centered = tape.sub(sq, column)?;
    let shifted = tape.add_const(centered, 0.5);
    let first = tape.mean(shifted)?;
    let first = tape.scale(first, 2.0);
    let d2 = tape.pair_sqdist(column)?;
    let d2_safe = tape.clamp_min(d2, 1e-14);
    let abs_diff = tape.sqrt(d2_safe)?;
    let second = tape.mean(abs_diff)?;
    let diff = tape.sub(first, second)?;
    Ok(tape.add_const(diff, -1.0 / 3.0))
}

/// Mean energy distance of the output coordinates to uniform, pinning each
/// marginal exactly.
fn marginal_uniformity_term(tape: &mut Tape, u: NodeId, d_c: usize) -> Result<NodeId> {
    let mut total: Option<NodeId> = None;
    for i in 0..d_c {
        let mut picker = Matrix::zeros(d_c, 1);
        picker.set(i, 0, 1.0);
        let pick_node = tape.constant(picker);
        let column = tape.matmul(u, pick_node)?;
        let marginal = energy_distance_to_uniform(tape, column)?;
        total = Some(match total {
            Some(t) => tape.add(t, marginal)?,
            None => marginal,
        });
    }
    let total = total.expect("d_c >= 1");
    Ok(tape.scale(total, 1.0 / d_c as f64))
}

/// Pair energy of the jointly lifted outputs, pressing coordinates apart
/// jointly (toward independence).
fn joint_uniformity_term(tape: &mut Tape, u: NodeId, angle: f64) -> Result<NodeId> {
    let joint_lift = circle_lift(tape, u, angle)?;
    uniformity_loss_node(tape, joint_lift, 2.0, false, 1e-12)
}

/// Absolute weight of the marginal energy-distance terms in the training
/// loss; the joint term is scaled by the configured uniformity weight.
const MARGINAL_WEIGHT: f64 = 1.0;

/// Fraction of training after which the entropy-term weights ramp linearly
/// to zero. The uniform output structure forms first; the final phase
/// (under an already tiny learning rate) lets the alignment term converge
/// without the equilibrium jitter the entropy pressure would sustain.
const ENTROPY_ANNEAL_START: f64 = 0.75;

/// Train an encoder minimizing the pair alignment term plus the entropy
/// term selected by the estimator. Aborts on divergence.
pub fn train_alignmax_encoder(
    pairs: &PairSet,
    d_c: usize,
    cfg: &AlignMaxConfig,
) -> Result<Encoder> {
    cfg.validate(d_c)?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".to_string()));
    }
    let obs_dim = pairs.x.cols();
    if d_c >= obs_dim {
        return Err(Error::InvalidArgument(format!(
            "content dimension {d_c} must be smaller than the observation dimension {obs_dim}"
        )));
    }
    let mut dims = vec![obs_dim];
    dims.extend_from_slice(&cfg.encoder_hidden);
    dims.push(d_c);
    let mut rng = Rng::new(cfg.seed);
    let mut net = MlpNetwork::init("enc", &dims, Activation::Tanh, &mut rng)?;

    let mut caches: Vec<(Matrix, Matrix)> = (0..net.n_layers())
        .map(|k| {
            let w = net.weight(k);
            (Matrix::zeros(w.rows(), w.cols()), Matrix::zeros(1, w.cols()))
        })
        .collect();
    const DECAY: f64 = 0.99;
    const EPS: f64 = 1e-8;

    let m = cfg.batch_size.min(pairs.len());
    for step in 0..cfg.steps {
        let progress = step as f64 / cfg.steps.max(1) as f64;
        let lr = cfg.lr * cfg.lr_decay.powf(progress);
        let entropy_scale = if progress < ENTROPY_ANNEAL_START {
            1.0
        } else {
            (1.0 - progress) / (1.0 - ENTROPY_ANNEAL_START)
        };
        let mut x_rows = Vec::with_capacity(m);
        let mut xt_rows = Vec::with_capacity(m);
        for _ in 0..m {
            let idx = rng.next_index(pairs.len());
            x_rows.push(pairs.x.row(idx).to_vec());
            xt_rows.push(pairs.x_tilde.row(idx).to_vec());
        }
        let x = Matrix::from_rows(&x_rows)?;
        let xt = Matrix::from_rows(&xt_rows)?;

        let encoder = Encoder { net: net.clone() };
        let mut tape = Tape::new();
        let xn = tape.constant(x);
        let xtn = tape.constant(xt);
        let params = encoder.net.param_leaves(&mut tape);
        let u = encoder.encode_graph(&mut tape, xn, &params)?;
        let ut = encoder.encode_graph(&mut tape, xtn, &params)?;
        let pair_d2 = tape.rowwise_sqdist(u, ut)?;
        let align = tape.mean(pair_d2)?;
        let loss = match cfg.entropy_estimator {
            EntropyEstimator::UniformityProxy => {
                let joint = joint_uniformity_term(&mut tape, u, cfg.angle_factor)?;
                let joint_w = tape.scale(joint, cfg.uniformity_weight * entropy_scale);
                let with_joint = tape.add(align, joint_w)?;
                let marginal = marginal_uniformity_term(&mut tape, u, d_c)?;
                let marginal_w = tape.scale(marginal, MARGINAL_WEIGHT * entropy_scale);
                tape.add(with_joint, marginal_w)?
            }
            EntropyEstimator::Knn => align,
        };
        let loss_value = tape.value(loss).scalar_value()?;
        if !loss_value.is_finite() {
            return Err(Error::Diverged {
                step,
                msg: "non-finite encoder loss".to_string(),
            });
        }
        tape.backward(loss)?;

        for (k, (weight, bias)) in net.layers_mut().enumerate() {
            let wg = tape.grad(params.0[k]);
            let bg = tape.grad(params.1[k]);
            let (wc, bc) = &mut caches[k];
            for ((p, g), c) in weight
                .as_mut_slice()
                .iter_mut()
                .zip(wg.as_slice())
                .zip(wc.as_mut_slice())
            {
                *c = DECAY * *c + (1.0 - DECAY) * g * g;
                *p -= lr * g / (c.sqrt() + EPS);
            }
            for ((p, g), c) in bias
                .as_mut_slice()
                .iter_mut()
                .zip(bg.as_slice())
                .zip(bc.as_mut_slice())
            {
                *c = DECAY * *c + (1.0 - DECAY) * g * g;
                *p -= lr * g / (c.sqrt() + EPS);
            }
        }
        if !net.all_parameters_finite() {
            return Err(Error::Diverged {
                step,
                msg: "non-finite encoder parameters".to_string(),
            });
        }
    }
    Ok(Encoder { net })
}

/// Entropy of encoded outputs under the configured estimator: the
/// Kozachenko-Leonenko estimate in nats, or the negated uniformity loss of
/// the lifted outputs (a monotone proxy, not in nats).
pub fn encoder_entropy_estimate(
    encoder: &Encoder,
    x: &Matrix,
    cfg: &AlignMaxConfig,
) -> Result<f64> {
    let u = encoder.encode(x)?;
    match cfg.entropy_estimator {
        EntropyEstimator::Knn => knn_entropy(&u, 3),
        EntropyEstimator::UniformityProxy => {
            let d_c = u.cols();
            let mut tape = Tape::new();
            let un = tape.constant(u);
            let joint = joint_uniformity_term(&mut tape, un, cfg.angle_factor)?;
            let marginal = marginal_uniformity_term(&mut tape, un, d_c)?;
            let total = tape.add(joint, marginal)?;
            Ok(-tape.value(total).scalar_value()?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pairs with the identity mixing: x = (c, eps) directly.
    fn identity_pairs(n: usize, seed: u64) -> PairSet {
        let mut rng = Rng::new(seed);
        let c = rng.sample_normal(n, 1).unwrap();
        let eps = rng.sample_normal(n, 1).unwrap();
        let fresh = rng.sample_normal(n, 1).unwrap();
        let mut eps_tilde = Matrix::zeros(n, 1);
        for r in 0..n {
            eps_tilde.set(r, 0, 0.2 * eps.get(r, 0) + 0.8 * fresh.get(r, 0));
        }
        let mut x = Matrix::zeros(n, 2);
        let mut xt = Matrix::zeros(n, 2);
        for r in 0..n {
            x.set(r, 0, c.get(r, 0));
            x.set(r, 1, eps.get(r, 0));
            xt.set(r, 0, c.get(r, 0));
            xt.set(r, 1, eps_tilde.get(r, 0));
        }
        PairSet {
            x,
            x_tilde: xt,
            c,
            eps,
            eps_tilde,
            a_mask: Matrix::filled(n, 1, 1.0),
        }
    }

    #[test]
    fn identity_mixing_alignment_converges() {
        let pairs = identity_pairs(2000, 31);
        let cfg = AlignMaxConfig {
            steps: 2500,
            batch_size: 128,
            ..Default::default()
        };
        let encoder = train_alignmax_encoder(&pairs, 1, &cfg).unwrap();
        let align = alignment_value(&encoder, &pairs).unwrap();
        assert!(align < 1e-3, "alignment {align}");
    }

    #[test]
    fn training_beats_the_untrained_encoder() {
        let pairs = identity_pairs(1500, 32);
        let cfg = AlignMaxConfig {
            steps: 400,
            batch_size: 128,
            ..Default::default()
        };
        let trained = train_alignmax_encoder(&pairs, 1, &cfg).unwrap();
        let untrained = train_alignmax_encoder(
            &pairs,
            1,
            &AlignMaxConfig {
                steps: 0,
                ..cfg.clone()
            },
        )
        .unwrap();
        let a_trained = alignment_value(&trained, &pairs).unwrap();
        let a_untrained = alignment_value(&untrained, &pairs).unwrap();
        assert!(
            a_trained < a_untrained,
            "trained {a_trained} vs untrained {a_untrained}"
        );
    }

    #[test]
    fn dimension_errors() {
        let pairs = identity_pairs(100, 33);
        let cfg = AlignMaxConfig::default();
        assert!(train_alignmax_encoder(&pairs, 2, &cfg).is_err());
        assert!(train_alignmax_encoder(&pairs, 3, &cfg).is_err());
    }

    #[test]
    fn encoder_outputs_live_in_unit_cube() {
        let pairs = identity_pairs(300, 34);
        let cfg = AlignMaxConfig {
            steps: 50,
            batch_size: 64,
            ..Default::default()
        };
        let encoder = train_alignmax_encoder(&pairs, 1, &cfg).unwrap();
        let u = encoder.encode(&pairs.x).unwrap();
        assert!(u.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
