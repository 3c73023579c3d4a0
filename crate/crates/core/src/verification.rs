//! Finite-difference verification suite over the library's losses.

use serde::Serialize;

use crate::error::Result;
use crate::gan::{
    discriminator_objective, generator_objective, Activation, LossKind, MlpNetwork,
};
use crate::numerics::{finite_diff_check, Matrix, ParameterSet, Rng, Tape};
use crate::regularizers::{batch_entropy_node, uniformity_loss_node, RegularizerConfig};

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckResult {
    pub name: String,
    pub instances: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn summarize(name: &str, errs: &[f64], tolerance: f64) -> GradCheckResult {
    let max = errs.iter().copied().fold(0.0f64, f64::max);
    GradCheckResult {
        name: name.to_string(),
        instances: errs.len(),
        max_rel_err: max,
        tolerance,
        pass: max < tolerance,
    }
}

const TOL: f64 = 1e-4;

/// Run every gradient check at `instances` random draws each. Results
/// report the worst relative error; nothing is asserted here so callers
/// can render or gate as they need.
pub fn run_gradient_suite(instances: usize, seed: u64) -> Result<Vec<GradCheckResult>> {
    let mut results = Vec::new();
    results.push(check_uniformity_direct(instances, seed)?);
    results.push(check_entropy_single_row(instances, seed + 1)?);
    results.push(check_entropy_batch(instances, seed + 2)?);
    results.push(check_uniformity_through_tap(instances, seed + 3)?);
    results.push(check_entropy_through_tap(instances, seed + 4)?);
    results.push(check_generator_objective(instances.min(25), seed + 5)?);
    results.push(check_wgan_gp_loss(instances.min(25), seed + 6)?);
    Ok(results)
}

/// Uniformity loss with in-graph L2 normalization, gradient to features.
fn check_uniformity_direct(instances: usize, seed: u64) -> Result<GradCheckResult> {
    let mut rng = Rng::new(seed);
    let mut errs = Vec::new();
    for _ in 0..instances {
        let f0 = rng.sample_normal(8, 4)?;
        let build = |m: &Matrix| -> Result<f64> {
            let mut tape = Tape::new();
            let f = tape.leaf(m.clone());
            let loss = uniformity_loss_node(&mut tape, f, 2.0, true, 1e-12)?;
            tape.value(loss).scalar_value()
        };
        let mut tape = Tape::new();
        let f = tape.leaf(f0.clone());
        let loss = uniformity_loss_node(&mut tape, f, 2.0, true, 1e-12)?;
        tape.backward(loss)?;
        let mut theta = ParameterSet::new();
        theta.push("f", f0.clone());
        let mut analytic = ParameterSet::new();
        analytic.push("f", tape.grad(f).clone());
        errs.push(finite_diff_check(
            |p| build(p.get(0).1),
            &theta,
            &analytic,
            1e-5,
        )?);
    }
    Ok(summarize("uniformity_loss", &errs, TOL))
}

fn check_entropy_single_row(instances: usize, seed: u64) -> Result<GradCheckResult> {
    let mut rng = Rng::new(seed);
    let mut errs = Vec::new();
    for _ in 0..instances {
        let f0 = rng.sample_normal(1, 16)?;
        let build = |m: &Matrix| -> Result<f64> {
            let mut tape = Tape::new();
            let f = tape.leaf(m.clone());
            let loss = batch_entropy_node(&mut tape, f, 1e-12)?;
            tape.value(loss).scalar_value()
        };
        let mut tape = Tape::new();
        let f = tape.leaf(f0.clone());
        let loss = batch_entropy_node(&mut tape, f, 1e-12)?;
        tape.backward(loss)?;
        let mut theta = ParameterSet::new();
        theta.push("f", f0.clone());
        let mut analytic = ParameterSet::new();
        analytic.push("f", tape.grad(f).clone());
        errs.push(finite_diff_check(
            |p| build(p.get(0).1),
            &theta,
            &analytic,
            1e-5,
        )?);
    }
    Ok(summarize("entropy_surrogate", &errs, TOL))
}

fn check_entropy_batch(instances: usize, seed: u64) -> Result<GradCheckResult> {
    let mut rng = Rng::new(seed);
    let mut errs = Vec::new();
    for _ in 0..instances {
        let f0 = rng.sample_normal(8, 16)?;
        let build = |m: &Matrix| -> Result<f64> {
            let mut tape = Tape::new();
            let f = tape.leaf(m.clone());
            let loss = batch_entropy_node(&mut tape, f, 1e-12)?;
            tape.value(loss).scalar_value()
        };
        let mut tape = Tape::new();
        let f = tape.leaf(f0.clone());
        let loss = batch_entropy_node(&mut tape, f, 1e-12)?;
        tape.backward(loss)?;
        let mut theta = ParameterSet::new();
        theta.push("f", f0.clone());
        let mut analytic = ParameterSet::new();
        analytic.push("f", tape.grad(f).clone());
        errs.push(finite_diff_check(
            |p| build(p.get(0).1),
            &theta,
            &analytic,
            1e-5,
        )?);
    }
    Ok(summarize("batch_entropy", &errs, TOL))
}

/// Loss through a generator tap with respect to the generator weights.
fn tap_loss_err<F>(rng: &mut Rng, loss_of_tap: F) -> Result<f64>
where
    F: Fn(&mut Tape, crate::numerics::NodeId) -> Result<crate::numerics::NodeId>,
{
    let net = MlpNetwork::init("g", &[3, 6, 5, 2], Activation::Tanh, rng)?;
    let x = rng.sample_normal(6, 3)?;
    let eval = |candidate: &MlpNetwork| -> Result<f64> {
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let fwd = candidate.forward_graph(&mut tape, xn)?;
        let loss = loss_of_tap(&mut tape, fwd.hidden[1])?;
        tape.value(loss).scalar_value()
    };
    let mut tape = Tape::new();
    let xn = tape.constant(x.clone());
    let fwd = net.forward_graph(&mut tape, xn)?;
    let loss = loss_of_tap(&mut tape, fwd.hidden[1])?;
    tape.backward(loss)?;
    let mut analytic = ParameterSet::new();
    for k in 0..net.n_layers() {
        analytic.push(format!("w{k}"), tape.grad(fwd.weight_nodes[k]).clone());
        analytic.push(format!("b{k}"), tape.grad(fwd.bias_nodes[k]).clone());
    }
    let theta = net.to_parameter_set();
    finite_diff_check(
        |p| {
            let mut candidate = net.clone();
            candidate.load_parameter_set(p)?;
            eval(&candidate)
        },
        &theta,
        &analytic,
        1e-5,
    )
}

fn check_uniformity_through_tap(instances: usize, seed: u64) -> Result<GradCheckResult> {
    let mut rng = Rng::new(seed);
    let mut errs = Vec::new();
    for _ in 0..instances {
        errs.push(tap_loss_err(&mut rng, |tape, tap| {
            uniformity_loss_node(tape, tap, 2.0, true, 1e-12)
        })?);
    }
    Ok(summarize("uniformity_loss_through_tap", &errs, TOL))
}

fn check_entropy_through_tap(instances: usize, seed: u64) -> Result<GradCheckResult> {
    let mut rng = Rng::new(seed);
    let mut errs = Vec::new();
    for _ in 0..instances {
        errs.push(tap_loss_err(&mut rng, |tape, tap| {
            batch_entropy_node(tape, tap, 1e-12)
        })?);
    }
    Ok(summarize("batch_entropy_through_tap", &errs, TOL))
}

/// Full composed generator objective through both networks' taps, gradient
/// with respect to the generator parameters.
fn check_generator_objective(instances: usize, seed: u64) -> Result<GradCheckResult> {
    let mut rng = Rng::new(seed);
    let mut errs = Vec::new();
    let reg = RegularizerConfig::default();
    for _ in 0..instances {
        let g_net = MlpNetwork::init("g", &[3, 6, 5, 2], Activation::Tanh, &mut rng)?;
        let d_net = MlpNetwork::init("d", &[2, 6, 5, 1], Activation::Tanh, &mut rng)?;
        let z = rng.sample_normal(6, 3)?;
        let eval = |candidate: &MlpNetwork| -> Result<f64> {
            let mut tape = Tape::new();
            let zn = tape.constant(z.clone());
            let g_params = candidate.param_leaves(&mut tape);
            let g_fwd = candidate.forward_graph_with(&mut tape, zn, &g_params)?;
            let d_params = d_net.param_constants(&mut tape);
            let d_fwd = d_net.forward_graph_with(&mut tape, g_fwd.output, &d_params)?;
            let terms = generator_objective(
                &mut tape,
                d_fwd.output,
                g_fwd.hidden[1],
                d_fwd.hidden[1],
                &reg,
                LossKind::Nonsaturating,
            )?;
            tape.value(terms.total).scalar_value()
        };
        let mut tape = Tape::new();
        let zn = tape.constant(z.clone());
        let g_params = g_net.param_leaves(&mut tape);
        let g_fwd = g_net.forward_graph_with(&mut tape, zn, &g_params)?;
        let d_params = d_net.param_constants(&mut tape);
        let d_fwd = d_net.forward_graph_with(&mut tape, g_fwd.output, &d_params)?;
        let terms = generator_objective(
            &mut tape,
            d_fwd.output,
            g_fwd.hidden[1],
            d_fwd.hidden[1],
            &reg,
            LossKind::Nonsaturating,
        )?;
        tape.backward(terms.total)?;
        let mut analytic = ParameterSet::new();
        for k in 0..g_net.n_layers() {
            analytic.push(format!("w{k}"), tape.grad(g_params.0[k]).clone());
            analytic.push(format!("b{k}"), tape.grad(g_params.1[k]).clone());
        }
        let theta = g_net.to_parameter_set();
        errs.push(finite_diff_check(
            |p| {
                let mut candidate = g_net.clone();
                candidate.load_parameter_set(p)?;
                eval(&candidate)
            },
            &theta,
            &analytic,
            1e-5,
        )?);
    }
    Ok(summarize("generator_objective", &errs, TOL))
}

/// Wasserstein critic loss with the gradient penalty, gradient with
/// respect to the critic parameters.
fn check_wgan_gp_loss(instances: usize, seed: u64) -> Result<GradCheckResult> {
    let mut rng = Rng::new(seed);
    let mut errs = Vec::new();
    for _ in 0..instances {
        let d_net = MlpNetwork::init("d", &[2, 6, 5, 1], Activation::Tanh, &mut rng)?;
        let real = rng.sample_normal(5, 2)?;
        let fake = rng.sample_normal(5, 2)?;
        let mut alpha = Matrix::zeros(5, 1);
        for r in 0..5 {
            alpha.set(r, 0, rng.next_f64());
        }
        let eval = |net: &MlpNetwork| -> Result<f64> {
            let mut tape = Tape::new();
            let real_node = tape.constant(real.clone());
            let fake_node = tape.constant(fake.clone());
            let params = net.param_leaves(&mut tape);
            let real_fwd = net.forward_graph_with(&mut tape, real_node, &params)?;
            let fake_fwd = net.forward_graph_with(&mut tape, fake_node, &params)?;
            let objective = discriminator_objective(
                &mut tape,
                real_fwd.output,
                fake_fwd.output,
                LossKind::WganGp,
            )?;
            let alpha_node = tape.constant(alpha.clone());
            let om_node = tape.constant(alpha.map(|a| 1.0 - a));
            let rp = tape.scale_rows(real_node, alpha_node)?;
            let fp = tape.scale_rows(fake_node, om_node)?;
            let x_hat = tape.add(rp, fp)?;
            let hat_fwd = net.forward_graph_with(&mut tape, x_hat, &params)?;
            let gx = net.input_gradient_graph(&mut tape, &hat_fwd)?;
            let ss = tape.row_sum_sq(gx);
            let ss_safe = tape.clamp_min(ss, 1e-24);
            let norms = tape.sqrt(ss_safe)?;
            let shifted = tape.add_const(norms, -1.0);
            let sq = tape.mul(shifted, shifted)?;
            let gp = tape.mean(sq)?;
            let neg = tape.scale(objective, -1.0);
            let wgp = tape.scale(gp, 10.0);
            let loss = tape.add(neg, wgp)?;
            tape.value(loss).scalar_value()
        };

        let mut tape = Tape::new();
        let real_node = tape.constant(real.clone());
        let fake_node = tape.constant(fake.clone());
        let params = d_net.param_leaves(&mut tape);
        let real_fwd = d_net.forward_graph_with(&mut tape, real_node, &params)?;
        let fake_fwd = d_net.forward_graph_with(&mut tape, fake_node, &params)?;
        let objective = discriminator_objective(
            &mut tape,
            real_fwd.output,
            fake_fwd.output,
            LossKind::WganGp,
        )?;
        let alpha_node = tape.constant(alpha.clone());
        let om_node = tape.constant(alpha.map(|a| 1.0 - a));
        let rp = tape.scale_rows(real_node, alpha_node)?;
        let fp = tape.scale_rows(fake_node, om_node)?;
        let x_hat = tape.add(rp, fp)?;
        let hat_fwd = d_net.forward_graph_with(&mut tape, x_hat, &params)?;
        let gx = d_net.input_gradient_graph(&mut tape, &hat_fwd)?;
        let ss = tape.row_sum_sq(gx);
        let ss_safe = tape.clamp_min(ss, 1e-24);
        let norms = tape.sqrt(ss_safe)?;
        let shifted = tape.add_const(norms, -1.0);
        let sq = tape.mul(shifted, shifted)?;
        let gp = tape.mean(sq)?;
        let neg = tape.scale(objective, -1.0);
        let wgp = tape.scale(gp, 10.0);
        let loss = tape.add(neg, wgp)?;
        tape.backward(loss)?;
        let mut analytic = ParameterSet::new();
        for k in 0..d_net.n_layers() {
            analytic.push(format!("w{k}"), tape.grad(params.0[k]).clone());
            analytic.push(format!("b{k}"), tape.grad(params.1[k]).clone());
        }
        let theta = d_net.to_parameter_set();
        errs.push(finite_diff_check(
            |p| {
                let mut candidate = d_net.clone();
                candidate.load_parameter_set(p)?;
                eval(&candidate)
            },
            &theta,
            &analytic,
            1e-5,
        )?);
    }
    Ok(summarize("wgan_gp_discriminator_loss", &errs, TOL))
}
