//! Multilayer perceptrons over the differentiation tape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, NodeId, ParameterSet, Rng, Tape};
use crate::regularizers::FeatureBatch;

/// Hidden-layer activation; the final layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    LeakyRelu,
    Sigmoid,
}

pub const LEAKY_SLOPE: f64 = 0.2;

/// Fully connected network: `dims = [in, h1, ..., hk, out]`, weights stored
/// input-by-output so a batch maps as `x W + b`.
#[derive(Debug, Clone)]
pub struct MlpNetwork {
    name: String,
    dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Matrix>,
    activation: Activation,
}

/// Node handles from one forward pass on a tape.
#[derive(Debug, Clone)]
pub struct MlpForward {
    pub output: NodeId,
    /// Pre-activation of each hidden layer.
    pub pre_activations: Vec<NodeId>,
    /// Post-activation of each hidden layer — the tap points.
    pub hidden: Vec<NodeId>,
    pub weight_nodes: Vec<NodeId>,
    pub bias_nodes: Vec<NodeId>,
}

impl MlpNetwork {
    /// Scaled-normal initialization: `sqrt(1/fan_in)` for tanh/sigmoid,
    /// `sqrt(2/fan_in)` for (leaky) relu. Biases start at zero.
    pub fn init(name: impl Into<String>, dims: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "mlp needs at least input and output dims, got {dims:?}"
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "mlp dims must be positive, got {dims:?}"
            )));
        }
        let gain = match activation {
            Activation::Relu | Activation::LeakyRelu => 2.0,
            Activation::Tanh | Activation::Sigmoid => 1.0,
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for k in 0..dims.len() - 1 {
            let scale = (gain / dims[k] as f64).sqrt();
            weights.push(rng.sample_normal(dims[k], dims[k + 1])?.scale(scale));
            biases.push(Matrix::zeros(1, dims[k + 1]));
        }
        Ok(MlpNetwork {
            name: name.into(),
            dims: dims.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.dims.len() - 2
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, k: usize) -> &Matrix {
        &self.weights[k]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn apply_activation(&self, tape: &mut Tape, x: NodeId) -> NodeId {
        match self.activation {
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu => tape.leaky_relu(x, LEAKY_SLOPE),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }

    /// Parameter leaf nodes (differentiable), one pair per layer.
    pub fn param_leaves(&self, tape: &mut Tape) -> (Vec<NodeId>, Vec<NodeId>) {
        let ws = self.weights.iter().map(|w| tape.leaf(w.clone())).collect();
        let bs = self.biases.iter().map(|b| tape.leaf(b.clone())).collect();
        (ws, bs)
    }

    /// Parameter constant nodes: the network participates in the graph but
    /// receives no gradient (a frozen discriminator during generator steps).
    pub fn param_constants(&self, tape: &mut Tape) -> (Vec<NodeId>, Vec<NodeId>) {
        let ws = self.weights.iter().map(|w| tape.constant(w.clone())).collect();
        let bs = self.biases.iter().map(|b| tape.constant(b.clone())).collect();
        (ws, bs)
    }

    /// Forward pass recorded on the tape. Parameters enter as leaves so
    /// gradients can be read back per layer.
    pub fn forward_graph(&self, tape: &mut Tape, input: NodeId) -> Result<MlpForward> {
        let params = self.param_leaves(tape);
        self.forward_graph_with(tape, input, &params)
    }

    /// Forward pass reusing existing parameter nodes, so several passes on
    /// one tape (for example, the discriminator on real and fake batches)
    /// accumulate gradients into one set of leaves.
    pub fn forward_graph_with(
        &self,
        tape: &mut Tape,
        input: NodeId,
        params: &(Vec<NodeId>, Vec<NodeId>),
    ) -> Result<MlpForward> {
        if tape.value(input).cols() != self.input_dim() {
            return Err(Error::shape(
                "mlp_forward",
                format!("input dim {}", self.input_dim()),
                tape.value(input).shape_str(),
            ));
        }
        let (weight_nodes, bias_nodes) = (params.0.clone(), params.1.clone());
        let mut pre_activations = Vec::new();
        let mut hidden = Vec::new();
        let mut h = input;
        let last = self.weights.len() - 1;
        for k in 0..self.weights.len() {
            let lin = tape.matmul(h, weight_nodes[k])?;
            let pre = tape.add_row_vec(lin, bias_nodes[k])?;
            if k < last {
                pre_activations.push(pre);
                h = self.apply_activation(tape, pre);
                hidden.push(h);
            } else {
                h = pre;
            }
        }
        Ok(MlpForward {
            output: h,
            pre_activations,
            hidden,
            weight_nodes,
            bias_nodes,
        })
    }

    /// Plain forward pass: output plus every hidden post-activation.
    pub fn forward_values(&self, input: &Matrix) -> Result<(Matrix, Vec<Matrix>)> {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let fwd = self.forward_graph(&mut tape, x)?;
        let hidden = fwd.hidden.iter().map(|&h| tape.value(h).clone()).collect();
        Ok((tape.value(fwd.output).clone(), hidden))
    }

    /// Derivative of the hidden activation at layer `k`, expressed with
    /// tape operators so it can itself be differentiated. Used to build
    /// input-gradient graphs (for the gradient penalty).
    pub fn activation_derivative_graph(
        &self,
        tape: &mut Tape,
        fwd: &MlpForward,
        k: usize,
    ) -> Result<NodeId> {
        let pre = fwd.pre_activations[k];
        let post = fwd.hidden[k];
        Ok(match self.activation {
            Activation::Tanh => {
                // 1 - tanh^2
                let sq = tape.mul(post, post)?;
                let neg = tape.scale(sq, -1.0);
                tape.add_const(neg, 1.0)
            }
            Activation::Relu => tape.step(pre),
            Activation::LeakyRelu => {
                let s = tape.step(pre);
                let scaled = tape.scale(s, 1.0 - LEAKY_SLOPE);
                tape.add_const(scaled, LEAKY_SLOPE)
            }
            Activation::Sigmoid => {
                // s (1 - s)
                let neg = tape.scale(post, -1.0);
                let one_minus = tape.add_const(neg, 1.0);
                tape.mul(post, one_minus)?
            }
        })
    }

    /// Gradient of the (scalar-output) network with respect to its input,
    /// for every row of the batch, built entirely from tape operators. The
    /// result is an M x input_dim node that remains differentiable with
    /// respect to the weights.
    pub fn input_gradient_graph(&self, tape: &mut Tape, fwd: &MlpForward) -> Result<NodeId> {
        if self.output_dim() != 1 {
            return Err(Error::InvalidArgument(format!(
                "input_gradient_graph needs a scalar-output network, got output dim {}",
                self.output_dim()
            )));
        }
        let m = tape.value(fwd.output).rows();
        let ones = tape.constant(Matrix::filled(m, 1, 1.0));
        let last = self.weights.len() - 1;
        let wt = tape.transpose(fwd.weight_nodes[last]);
        let mut g = tape.matmul(ones, wt)?;
        for k in (0..last).rev() {
            let dact = self.activation_derivative_graph(tape, fwd, k)?;
            let gated = tape.mul(g, dact)?;
            let wt = tape.transpose(fwd.weight_nodes[k]);
            g = tape.matmul(gated, wt)?;
        }
        Ok(g)
    }

    /// Apply a gradient update produced by the optimizer.
    pub fn layers_mut(&mut self) -> impl Iterator<Item = (&mut Matrix, &mut Matrix)> {
        self.weights.iter_mut().zip(self.biases.iter_mut())
    }

    /// Parameters as a named set (weights then bias per layer).
    pub fn to_parameter_set(&self) -> ParameterSet {
        let mut set = ParameterSet::new();
        for k in 0..self.weights.len() {
            set.push(format!("{}.w{k}", self.name), self.weights[k].clone());
            set.push(format!("{}.b{k}", self.name), self.biases[k].clone());
        }
        set
    }

    /// Replace parameters from a set produced by [`Self::to_parameter_set`].
    pub fn load_parameter_set(&mut self, set: &ParameterSet) -> Result<()> {
        if set.len() != 2 * self.weights.len() {
            return Err(Error::InvalidArgument(format!(
                "parameter set has {} entries, network needs {}",
                set.len(),
                2 * self.weights.len()
            )));
        }
        for k in 0..self.weights.len() {
            let (_, w) = set.get(2 * k);
            let (_, b) = set.get(2 * k + 1);
            if w.shape() != self.weights[k].shape() || b.shape() != self.biases[k].shape() {
                return Err(Error::shape(
                    "load_parameter_set",
                    self.weights[k].shape_str(),
                    w.shape_str(),
                ));
            }
            self.weights[k] = w.clone();
            self.biases[k] = b.clone();
        }
        Ok(())
    }

    pub fn all_parameters_finite(&self) -> bool {
        self.weights.iter().all(Matrix::all_finite) && self.biases.iter().all(Matrix::all_finite)
    }
}

/// Post-activation values of hidden layer `layer_index` for a batch.
pub fn feature_tap(net: &MlpNetwork, layer_index: usize, input: &Matrix) -> Result<FeatureBatch> {
    if layer_index >= net.n_hidden_layers() {
        return Err(Error::InvalidArgument(format!(
            "feature_tap: layer index {layer_index} out of range, network has {} hidden layers",
            net.n_hidden_layers()
        )));
    }
    let (_, hidden) = net.forward_values(input)?;
    Ok(FeatureBatch::new(hidden[layer_index].clone(), layer_index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, ParameterSet};
    use crate::regularizers::uniformity_loss_node;

    #[test]
    fn tap_shape_and_range_check() {
        let mut rng = Rng::new(1);
        let net = MlpNetwork::init("g", &[4, 8, 6, 2], Activation::Tanh, &mut rng).unwrap();
        let x = rng.sample_normal(5, 4).unwrap();
        let tap = feature_tap(&net, 0, &x).unwrap();
        assert_eq!(tap.features.shape(), (5, 8));
        let tap = feature_tap(&net, 1, &x).unwrap();
        assert_eq!(tap.features.shape(), (5, 6));
        assert!(feature_tap(&net, 2, &x).is_err());
    }

    #[test]
    fn tap_matches_fresh_forward_bitwise() {
        let mut rng = Rng::new(2);
        let net = MlpNetwork::init("g", &[3, 8, 8, 2], Activation::Tanh, &mut rng).unwrap();
        let x = rng.sample_normal(7, 3).unwrap();
        let a = feature_tap(&net, 1, &x).unwrap();
        let b = feature_tap(&net, 1, &x).unwrap();
        for (u, v) in a.features.as_slice().iter().zip(b.features.as_slice()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
        // Graph forward agrees with value forward.
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let fwd = net.forward_graph(&mut tape, xn).unwrap();
        assert_eq!(tape.value(fwd.hidden[1]), &a.features);
    }

    #[test]
    fn uniformity_through_tap_passes_finite_differences() {
        let mut rng = Rng::new(3);
        let net = MlpNetwork::init("g", &[3, 6, 5, 2], Activation::Tanh, &mut rng).unwrap();
        let x = rng.sample_normal(6, 3).unwrap();

        let eval_with = |net: &MlpNetwork| -> crate::error::Result<f64> {
            let mut tape = Tape::new();
            let xn = tape.constant(x.clone());
            let fwd = net.forward_graph(&mut tape, xn)?;
            let loss = uniformity_loss_node(&mut tape, fwd.hidden[1], 2.0, true, 1e-12)?;
            tape.value(loss).scalar_value()
        };

        // Analytic gradients via the tape.
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let fwd = net.forward_graph(&mut tape, xn).unwrap();
        let loss = uniformity_loss_node(&mut tape, fwd.hidden[1], 2.0, true, 1e-12).unwrap();
        tape.backward(loss).unwrap();
        let mut analytic = ParameterSet::new();
        for k in 0..net.n_layers() {
            analytic.push(format!("w{k}"), tape.grad(fwd.weight_nodes[k]).clone());
            analytic.push(format!("b{k}"), tape.grad(fwd.bias_nodes[k]).clone());
        }

        let theta = net.to_parameter_set();
        let err = finite_diff_check(
            |p| {
                let mut candidate = net.clone();
                candidate.load_parameter_set(p)?;
                eval_with(&candidate)
            },
            &theta,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "tap gradient error {err:.3e}");
    }

    #[test]
    fn input_gradient_graph_matches_finite_differences() {
        // d D(x) / d x built as a graph must match perturbing the input.
        let mut rng = Rng::new(4);
        for activation in [Activation::Tanh, Activation::Sigmoid, Activation::LeakyRelu] {
            let net = MlpNetwork::init("d", &[3, 6, 5, 1], activation, &mut rng).unwrap();
            let x = rng.sample_normal(4, 3).unwrap();
            let mut tape = Tape::new();
            let xn = tape.constant(x.clone());
            let fwd = net.forward_graph(&mut tape, xn).unwrap();
            let gx = net.input_gradient_graph(&mut tape, &fwd).unwrap();
            let got = tape.value(gx).clone();

            let h = 1e-6;
            for r in 0..4 {
                for c in 0..3 {
                    let mut plus = x.clone();
                    plus.set(r, c, x.get(r, c) + h);
                    let mut minus = x.clone();
                    minus.set(r, c, x.get(r, c) - h);
                    let (op, _) = net.forward_values(&plus).unwrap();
                    let (om, _) = net.forward_values(&minus).unwrap();
                    let fd = (op.get(r, 0) - om.get(r, 0)) / (2.0 * h);
                    assert!(
                        (got.get(r, c) - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                        "{activation:?} ({r},{c}): {} vs {fd}",
                        got.get(r, c)
                    );
                }
            }
        }
    }

    #[test]
    fn init_rejects_degenerate_dims() {
        let mut rng = Rng::new(5);
        assert!(MlpNetwork::init("g", &[4], Activation::Tanh, &mut rng).is_err());
        assert!(MlpNetwork::init("g", &[4, 0, 2], Activation::Tanh, &mut rng).is_err());
    }
}
