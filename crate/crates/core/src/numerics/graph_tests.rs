use crate::error::Result;
use crate::numerics::{finite_diff_check, Matrix, NodeId, ParameterSet, Rng, Tape};

fn scalar_leaf(tape: &mut Tape, v: f64) -> NodeId {
    tape.leaf(Matrix::scalar(v))
}

#[test]
fn product_of_scalars() {
    let mut tape = Tape::new();
    let x = scalar_leaf(&mut tape, 2.0);
    let y = scalar_leaf(&mut tape, 3.0);
    let p = tape.matmul(x, y).unwrap();
    assert_eq!(tape.value(p).get(0, 0), 6.0);
}

#[test]
fn tanh_at_zero() {
    let mut tape = Tape::new();
    let x = scalar_leaf(&mut tape, 0.0);
    let t = tape.tanh(x);
    assert_eq!(tape.value(t).get(0, 0), 0.0);
}

#[test]
fn mean_of_three() {
    let mut tape = Tape::new();
    let v = tape.leaf(Matrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap());
    let m = tape.mean(v).unwrap();
    assert_eq!(tape.value(m).get(0, 0), 2.0);
}

#[test]
fn d_square_dx() {
    let mut tape = Tape::new();
    let x = scalar_leaf(&mut tape, 3.0);
    let sq = tape.mul(x, x).unwrap();
    tape.backward(sq).unwrap();
    assert_eq!(tape.grad(x).get(0, 0), 6.0);
}

#[test]
fn d_tanh_at_zero() {
    let mut tape = Tape::new();
    let x = scalar_leaf(&mut tape, 0.0);
    let t = tape.tanh(x);
    tape.backward(t).unwrap();
    assert_eq!(tape.grad(x).get(0, 0), 1.0);
}

#[test]
fn d_mean_is_one_over_n() {
    let n = 7;
    let mut tape = Tape::new();
    let v = tape.leaf(Matrix::filled(1, n, 2.5));
    let m = tape.mean(v).unwrap();
    tape.backward(m).unwrap();
    for c in 0..n {
        assert_eq!(tape.grad(v).get(0, c), 1.0 / n as f64);
    }
}

#[test]
fn backward_requires_scalar_root() {
    let mut tape = Tape::new();
    let v = tape.leaf(Matrix::zeros(2, 2));
    assert!(tape.backward(v).is_err());
}

#[test]
fn backward_accumulates_without_reset() {
    let mut tape = Tape::new();
    let x = scalar_leaf(&mut tape, 3.0);
    let sq = tape.mul(x, x).unwrap();
    tape.backward(sq).unwrap();
    tape.backward(sq).unwrap();
    assert_eq!(tape.grad(x).get(0, 0), 12.0);
    tape.zero_grad();
    tape.backward(sq).unwrap();
    assert_eq!(tape.grad(x).get(0, 0), 6.0);
}

#[test]
fn backward_is_linear_over_loss_sums() {
    // Backward through a sum of losses equals the sum of individual
    // backward passes, exactly.
    let mut rng = Rng::new(404);
    let x0 = rng.sample_normal(3, 4).unwrap();

    let mut tape = Tape::new();
    let x = tape.leaf(x0.clone());
    let t = tape.tanh(x);
    let l1 = tape.mean(t).unwrap();
    let sq = tape.mul(x, x).unwrap();
    let l2 = tape.sum(sq);
    let total = tape.add(l1, l2).unwrap();
    tape.backward(total).unwrap();
    let combined = tape.grad(x).clone();

    let mut tape2 = Tape::new();
    let x2 = tape2.leaf(x0);
    let t2 = tape2.tanh(x2);
    let l1b = tape2.mean(t2).unwrap();
    let sq2 = tape2.mul(x2, x2).unwrap();
    let l2b = tape2.sum(sq2);
    tape2.backward(l1b).unwrap();
    tape2.backward(l2b).unwrap();
    let accumulated = tape2.grad(x2).clone();

    assert_eq!(combined, accumulated);
}

#[test]
fn evaluation_is_deterministic() {
    let mut rng = Rng::new(777);
    let a0 = rng.sample_normal(4, 5).unwrap();
    let b0 = rng.sample_normal(5, 3).unwrap();
    let run = |a: &Matrix, b: &Matrix| {
        let mut tape = Tape::new();
        let an = tape.leaf(a.clone());
        let bn = tape.leaf(b.clone());
        let mm = tape.matmul(an, bn).unwrap();
        let t = tape.tanh(mm);
        let m = tape.mean(t).unwrap();
        tape.value(m).get(0, 0)
    };
    assert_eq!(run(&a0, &b0).to_bits(), run(&a0, &b0).to_bits());
}

#[test]
fn shape_errors_name_the_operator() {
    let mut tape = Tape::new();
    let a = tape.leaf(Matrix::zeros(2, 3));
    let b = tape.leaf(Matrix::zeros(2, 3));
    let err = tape.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("matmul") && err.contains("2x3"), "{err}");
    let c = tape.leaf(Matrix::zeros(4, 1));
    let err = tape.scale_rows(a, c).unwrap_err().to_string();
    assert!(err.contains("scale_rows"), "{err}");
}

#[test]
fn step_has_zero_gradient() {
    let mut tape = Tape::new();
    let x = tape.leaf(Matrix::from_vec(1, 3, vec![-1.0, 0.5, 2.0]).unwrap());
    let s = tape.step(x);
    assert_eq!(tape.value(s).as_slice(), &[0.0, 1.0, 1.0]);
    let total = tape.sum(s);
    tape.backward(total).unwrap();
    assert_eq!(tape.grad(x).as_slice(), &[0.0, 0.0, 0.0]);
}

#[test]
fn log_sigmoid_is_stable_at_extreme_logits() {
    let mut tape = Tape::new();
    let x = tape.leaf(Matrix::from_vec(1, 3, vec![-900.0, 0.0, 900.0]).unwrap());
    let ls = tape.log_sigmoid(x);
    let v = tape.value(ls).as_slice().to_vec();
    assert_eq!(v[0], -900.0);
    assert!((v[1] - (0.5f64).ln()).abs() < 1e-15);
    assert_eq!(v[2], 0.0);
    assert!(v.iter().all(|x| x.is_finite()));
}

// ---- per-operator gradient sweep ----

/// Shift entries away from a kink at `k` so central differences stay valid.
fn away_from(m: Matrix, k: f64, margin: f64) -> Matrix {
    m.map(|x| if (x - k).abs() < margin { x + 2.0 * margin } else { x })
}

/// For `instances` random draws: build `op` over leaves, reduce to a scalar
/// with a fixed random weighting (so each output coordinate receives a
/// distinct upstream gradient), and compare the tape gradient of every
/// input coordinate against central differences.
fn sweep_operator<F>(name: &str, seed: u64, instances: usize, inputs: fn(&mut Rng) -> Vec<Matrix>, op: F)
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let mut rng = Rng::new(seed);
    for inst in 0..instances {
        let mats = inputs(&mut rng);

        // Probe the output shape to draw the fixed weighting.
        let mut probe = Tape::new();
        let ids: Vec<NodeId> = mats.iter().map(|m| probe.leaf(m.clone())).collect();
        let out = op(&mut probe, &ids).expect(name);
        let shape = probe.value(out).shape();
        let weight = rng.sample_normal(shape.0, shape.1).unwrap();

        let eval = |theta: &ParameterSet| -> Result<f64> {
            let mut tape = Tape::new();
            let ids: Vec<NodeId> = theta.iter().map(|(_, m)| tape.leaf(m.clone())).collect();
            let out = op(&mut tape, &ids)?;
            let w = tape.constant(weight.clone());
            let weighted = tape.mul(out, w)?;
            let loss = tape.sum(weighted);
            tape.value(loss).scalar_value()
        };

        let mut theta = ParameterSet::new();
        for (k, m) in mats.iter().enumerate() {
            theta.push(format!("in{k}"), m.clone());
        }

        // Analytic gradients.
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = mats.iter().map(|m| tape.leaf(m.clone())).collect();
        let out = op(&mut tape, &ids).expect(name);
        let w = tape.constant(weight.clone());
        let weighted = tape.mul(out, w).unwrap();
        let loss = tape.sum(weighted);
        tape.backward(loss).unwrap();
        let mut analytic = ParameterSet::new();
        for (k, id) in ids.iter().enumerate() {
            analytic.push(format!("in{k}"), tape.grad(*id).clone());
        }

        let err = finite_diff_check(eval, &theta, &analytic, 1e-5).unwrap();
        assert!(
            err < 1e-4,
            "{name} instance {inst}: max relative error {err:.3e}"
        );
    }
}

const N_INSTANCES: usize = 100;

#[test]
fn grad_matmul() {
    sweep_operator(
        "matmul",
        101,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap(), r.sample_normal(4, 2).unwrap()],
        |t, ids| t.matmul(ids[0], ids[1]),
    );
}

#[test]
fn grad_transpose() {
    sweep_operator(
        "transpose",
        102,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.transpose(ids[0])),
    );
}

#[test]
fn grad_add_sub_mul() {
    sweep_operator(
        "add",
        103,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap(), r.sample_normal(3, 4).unwrap()],
        |t, ids| t.add(ids[0], ids[1]),
    );
    sweep_operator(
        "sub",
        104,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap(), r.sample_normal(3, 4).unwrap()],
        |t, ids| t.sub(ids[0], ids[1]),
    );
    sweep_operator(
        "mul",
        105,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap(), r.sample_normal(3, 4).unwrap()],
        |t, ids| t.mul(ids[0], ids[1]),
    );
}

#[test]
fn grad_broadcast_ops() {
    sweep_operator(
        "add_row_vec",
        106,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap(), r.sample_normal(1, 4).unwrap()],
        |t, ids| t.add_row_vec(ids[0], ids[1]),
    );
    sweep_operator(
        "scale_rows",
        107,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap(), r.sample_normal(3, 1).unwrap()],
        |t, ids| t.scale_rows(ids[0], ids[1]),
    );
}

#[test]
fn grad_scalar_parameterized() {
    sweep_operator(
        "scale",
        108,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.scale(ids[0], -1.7)),
    );
    sweep_operator(
        "add_const",
        109,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.add_const(ids[0], 0.3)),
    );
    sweep_operator(
        "clamp_min",
        110,
        N_INSTANCES,
        |r| vec![away_from(r.sample_normal(3, 4).unwrap(), 0.0, 1e-3)],
        |t, ids| Ok(t.clamp_min(ids[0], 0.0)),
    );
}

#[test]
fn grad_smooth_elementwise() {
    sweep_operator(
        "tanh",
        111,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.tanh(ids[0])),
    );
    sweep_operator(
        "sigmoid",
        112,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.sigmoid(ids[0])),
    );
    sweep_operator(
        "log_sigmoid",
        113,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.log_sigmoid(ids[0])),
    );
    sweep_operator(
        "exp",
        114,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap().scale(0.5)],
        |t, ids| Ok(t.exp(ids[0])),
    );
    sweep_operator(
        "sin",
        115,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.sin(ids[0])),
    );
    sweep_operator(
        "cos",
        116,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.cos(ids[0])),
    );
}

#[test]
fn grad_kinked_and_domain_restricted() {
    sweep_operator(
        "relu",
        117,
        N_INSTANCES,
        |r| vec![away_from(r.sample_normal(3, 4).unwrap(), 0.0, 1e-3)],
        |t, ids| Ok(t.relu(ids[0])),
    );
    sweep_operator(
        "leaky_relu",
        118,
        N_INSTANCES,
        |r| vec![away_from(r.sample_normal(3, 4).unwrap(), 0.0, 1e-3)],
        |t, ids| Ok(t.leaky_relu(ids[0], 0.2)),
    );
    sweep_operator(
        "log",
        119,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap().map(|x| x.abs() + 0.5)],
        |t, ids| t.log(ids[0]),
    );
    sweep_operator(
        "sqrt",
        120,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap().map(|x| x * x + 0.5)],
        |t, ids| t.sqrt(ids[0]),
    );
    sweep_operator(
        "recip",
        121,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap().map(|x| x.signum() * (x.abs() + 0.5))],
        |t, ids| t.recip(ids[0]),
    );
}

#[test]
fn grad_row_reductions() {
    sweep_operator(
        "row_mean",
        122,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 5).unwrap()],
        |t, ids| t.row_mean(ids[0]),
    );
    sweep_operator(
        "row_var",
        123,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 5).unwrap()],
        |t, ids| t.row_var(ids[0]),
    );
    sweep_operator(
        "row_sum_sq",
        124,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 5).unwrap()],
        |t, ids| Ok(t.row_sum_sq(ids[0])),
    );
}

#[test]
fn grad_distance_ops() {
    sweep_operator(
        "rowwise_sqdist",
        125,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap(), r.sample_normal(3, 4).unwrap()],
        |t, ids| t.rowwise_sqdist(ids[0], ids[1]),
    );
    sweep_operator(
        "pair_sqdist",
        126,
        N_INSTANCES,
        |r| vec![r.sample_normal(5, 3).unwrap()],
        |t, ids| t.pair_sqdist(ids[0]),
    );
}

#[test]
fn grad_concat_and_full_reductions() {
    sweep_operator(
        "hconcat",
        127,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 2).unwrap(), r.sample_normal(3, 3).unwrap()],
        |t, ids| t.hconcat(ids[0], ids[1]),
    );
    sweep_operator(
        "sum",
        128,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| Ok(t.sum(ids[0])),
    );
    sweep_operator(
        "mean",
        129,
        N_INSTANCES,
        |r| vec![r.sample_normal(3, 4).unwrap()],
        |t, ids| t.mean(ids[0]),
    );
}

#[test]
fn grad_l2_normalize_rows() {
    sweep_operator(
        "l2_normalize_rows",
        130,
        N_INSTANCES,
        |r| vec![r.sample_normal(4, 3).unwrap().map(|x| x + 0.1)],
        |t, ids| t.l2_normalize_rows(ids[0], 1e-12),
    );
}

#[test]
fn constants_receive_no_gradient() {
    let mut tape = Tape::new();
    let x = tape.leaf(Matrix::scalar(2.0));
    let c = tape.constant(Matrix::scalar(5.0));
    let p = tape.mul(x, c).unwrap();
    tape.backward(p).unwrap();
    assert_eq!(tape.grad(x).get(0, 0), 5.0);
    assert_eq!(tape.grad(c).get(0, 0), 0.0);
}
