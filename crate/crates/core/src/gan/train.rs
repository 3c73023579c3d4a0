//! Deterministic GAN training with JSONL metrics.
//!
//! One run owns one RNG and one pair of networks. The consumption order of
//! the RNG stream is fixed (generator init, discriminator init, then per
//! step: critic batches before the generator batch), so a seed pins the
//! whole trajectory. Gradient verification and the final sample dump use a
//! derived substream or run after training, and cannot perturb it.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{save_features, LabeledDataset};
use crate::error::{Error, Result};
use crate::gan::coverage::mode_coverage;
use crate::gan::mlp::{Activation, MlpNetwork};
use crate::gan::objectives::{
    discriminator_objective, generator_objective, generator_original_loss, LossKind,
};
use crate::numerics::{Matrix, NodeId, Rng, Tape};
use crate::regularizers::{
    batch_entropy_value, entropy_surrogate_value, pairwise_potential_metric,
    uniformity_loss_value, RegularizerConfig,
};

/// Every knob of a training run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub z_dim: usize,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
    pub loss_kind: LossKind,
    pub regularizer: RegularizerConfig,
    /// Hidden-layer index tapped on the generator (0-based).
    pub tap_layer_g: usize,
    /// Hidden-layer index tapped on the discriminator (0-based).
    pub tap_layer_d: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub n_critic: usize,
    pub gp_weight: f64,
    pub seed: u64,
    /// Samples drawn for the final dump.
    pub sample_dump: usize,
    /// Spot-check optimizer gradients against central differences.
    pub verify_gradients: bool,
    /// Interval (in generator steps) between spot checks.
    pub verify_every: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            z_dim: 16,
            g_hidden: vec![32, 32, 32, 32],
            d_hidden: vec![32, 32, 32, 32],
            loss_kind: LossKind::Nonsaturating,
            regularizer: RegularizerConfig::default(),
            tap_layer_g: 1,
            tap_layer_d: 1,
            lr_g: 1e-3,
            lr_d: 1e-3,
            batch_size: 64,
            steps: 20_000,
            n_critic: 1,
            gp_weight: 10.0,
            seed: 0,
            sample_dump: 1024,
            verify_gradients: false,
            verify_every: 1000,
        }
    }
}

impl GanConfig {
    /// Defaults for a loss kind; the Wasserstein form takes five critic
    /// steps per generator step.
    pub fn default_for(kind: LossKind) -> Self {
        let mut cfg = GanConfig {
            loss_kind: kind,
            ..Default::default()
        };
        if kind == LossKind::WganGp {
            cfg.n_critic = 5;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.regularizer.validate()?;
        if self.z_dim == 0 {
            return Err(Error::InvalidArgument("z_dim must be positive".to_string()));
        }
        if self.g_hidden.is_empty() || self.d_hidden.is_empty() {
            return Err(Error::InvalidArgument(
                "generator and discriminator need at least one hidden layer".to_string(),
            ));
        }
        if self.tap_layer_g >= self.g_hidden.len() {
            return Err(Error::InvalidArgument(format!(
                "tap_layer_g {} out of range for {} hidden layers",
                self.tap_layer_g,
                self.g_hidden.len()
            )));
        }
        if self.tap_layer_d >= self.d_hidden.len() {
            return Err(Error::InvalidArgument(format!(
                "tap_layer_d {} out of range for {} hidden layers",
                self.tap_layer_d,
                self.d_hidden.len()
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument(
                "batch_size must be at least 2 (the uniformity loss needs pairs)".to_string(),
            ));
        }
        if self.n_critic == 0 {
            return Err(Error::InvalidArgument("n_critic must be at least 1".to_string()));
        }
        if self.lr_g <= 0.0 || self.lr_d <= 0.0 {
            return Err(Error::InvalidArgument("learning rates must be positive".to_string()));
        }
        if self.gp_weight < 0.0 {
            return Err(Error::InvalidArgument("gp_weight must be nonnegative".to_string()));
        }
        if self.verify_every == 0 {
            return Err(Error::InvalidArgument("verify_every must be positive".to_string()));
        }
        Ok(())
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss_total: f64,
    pub g_loss_ori: f64,
    pub l_uni_g: f64,
    pub l_uni_d: f64,
    pub h_g: f64,
    pub h_d: f64,
    pub pairwise_potential: f64,
    pub batch_entropy_metric: f64,
    pub mode_coverage: usize,
    pub high_quality_fraction: f64,
}

impl MetricsRecord {
    pub fn all_finite(&self) -> bool {
        [
            self.d_loss,
            self.g_loss_total,
            self.g_loss_ori,
            self.l_uni_g,
            self.l_uni_d,
            self.h_g,
            self.h_d,
            self.pairwise_potential,
            self.batch_entropy_metric,
            self.high_quality_fraction,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Whether the generator trains on the composed loss or only on the
/// original adversarial term. The plain mode builds no regularizer graph at
/// all; it exists so zero-weight composition can be checked against a
/// trainer that has never seen the regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorLossMode {
    Composed,
    OriginalOnly,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub steps_completed: usize,
    pub final_record: Option<MetricsRecord>,
}

const RMSPROP_DECAY: f64 = 0.99;
const RMSPROP_EPS: f64 = 1e-8;

/// Momentum-free adaptive optimizer: squared-gradient running average with
/// decay 0.99 and epsilon 1e-8.
struct RmsProp {
    lr: f64,
    caches: Vec<(Matrix, Matrix)>,
}

impl RmsProp {
    fn new(net: &MlpNetwork, lr: f64) -> Self {
        let caches = (0..net.n_layers())
            .map(|k| {
                let w = net.weight(k);
                (
                    Matrix::zeros(w.rows(), w.cols()),
                    Matrix::zeros(1, w.cols()),
                )
            })
            .collect();
        RmsProp { lr, caches }
    }

    fn step(&mut self, net: &mut MlpNetwork, grads: &[(Matrix, Matrix)]) {
        for (k, (weight, bias)) in net.layers_mut().enumerate() {
            let (wg, bg) = &grads[k];
            let (wc, bc) = &mut self.caches[k];
            apply_rmsprop(weight, wg, wc, self.lr);
            apply_rmsprop(bias, bg, bc, self.lr);
        }
    }
}

fn apply_rmsprop(param: &mut Matrix, grad: &Matrix, cache: &mut Matrix, lr: f64) {
    for ((p, &g), c) in param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(cache.as_mut_slice())
    {
        *c = RMSPROP_DECAY * *c + (1.0 - RMSPROP_DECAY) * g * g;
        *p -= lr * g / (c.sqrt() + RMSPROP_EPS);
    }
}

fn read_grads(tape: &Tape, fwd_params: &(Vec<NodeId>, Vec<NodeId>)) -> Vec<(Matrix, Matrix)> {
    fwd_params
        .0
        .iter()
        .zip(fwd_params.1.iter())
        .map(|(&w, &b)| (tape.grad(w).clone(), tape.grad(b).clone()))
        .collect()
}

/// Train on a dataset, writing `metrics.jsonl`, `samples.csv`,
/// `features_g.csv`, `features_d.csv`, and `params.txt` into `out_dir`.
pub fn train(
    cfg: &GanConfig,
    dataset: &LabeledDataset,
    out_dir: &Path,
    mode: GeneratorLossMode,
) -> Result<RunSummary> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".to_string()));
    }
    fs::create_dir_all(out_dir)?;
    let data_dim = dataset.points.cols();

    let mut rng = Rng::new(cfg.seed);
    let g_dims: Vec<usize> = std::iter::once(cfg.z_dim)
        .chain(cfg.g_hidden.iter().copied())
        .chain(std::iter::once(data_dim))
        .collect();
    let d_dims: Vec<usize> = std::iter::once(data_dim)
        .chain(cfg.d_hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect();
    let mut g_net = MlpNetwork::init("g", &g_dims, Activation::Tanh, &mut rng)?;
    let mut d_net = MlpNetwork::init("d", &d_dims, Activation::Tanh, &mut rng)?;
    let mut opt_g = RmsProp::new(&g_net, cfg.lr_g);
    let mut opt_d = RmsProp::new(&d_net, cfg.lr_d);
    let verify_rng = rng.substream(0xF1DE);

    let metrics_path = out_dir.join("metrics.jsonl");
    let mut log = BufWriter::new(fs::File::create(&metrics_path)?);
    let mut final_record: Option<MetricsRecord> = None;

    for step in 0..cfg.steps {
        let mut d_loss_value = 0.0;
        for _ in 0..cfg.n_critic {
            d_loss_value = discriminator_step(cfg, dataset, &g_net, &mut d_net, &mut opt_d, &mut rng)?;
        }

        let z = rng.sample_normal(cfg.batch_size, cfg.z_dim)?;
        let g_out = generator_step(cfg, &z, &g_net, &d_net, mode)?;

        // Spot-check before the update so the gradients match the point
        // they were taken at.
        if cfg.verify_gradients && step % cfg.verify_every == 0 {
            let mut stream = verify_rng.substream(step as u64);
            verify_generator_gradients(cfg, &z, &g_net, &d_net, mode, &g_out.grads, &mut stream)?;
        }
        opt_g.step(&mut g_net, &g_out.grads);

        let record = build_record(cfg, dataset, step, d_loss_value, &g_out)?;
        if !record.all_finite() || !g_net.all_parameters_finite() || !d_net.all_parameters_finite() {
            writeln!(log, "{}", serde_json::to_string(&record)?)?;
            log.flush()?;
            let last = final_record
                .as_ref()
                .map(|r| format!("last finite record at step {}", r.step))
                .unwrap_or_else(|| "no finite record".to_string());
            return Err(Error::Diverged {
                step,
                msg: format!("non-finite loss or parameters; {last}"),
            });
        }
        writeln!(log, "{}", serde_json::to_string(&record)?)?;
        final_record = Some(record);
    }
    log.flush()?;

    // Final artifacts; drawn after the training stream so shorter runs with
    // the same seed share every training draw.
    let z = rng.sample_normal(cfg.sample_dump.max(2), cfg.z_dim)?;
    let (samples, g_hidden) = g_net.forward_values(&z)?;
    let (_, d_hidden) = d_net.forward_values(&samples)?;
    save_samples(&out_dir.join("samples.csv"), &samples)?;
    save_features(&out_dir.join("features_g.csv"), &g_hidden[cfg.tap_layer_g])?;
    save_features(&out_dir.join("features_d.csv"), &d_hidden[cfg.tap_layer_d])?;
    save_params(&out_dir.join("params.txt"), &[&g_net, &d_net])?;

    Ok(RunSummary {
        run_dir: out_dir.to_path_buf(),
        steps_completed: cfg.steps,
        final_record,
    })
}

fn discriminator_step(
    cfg: &GanConfig,
    dataset: &LabeledDataset,
    g_net: &MlpNetwork,
    d_net: &mut MlpNetwork,
    opt_d: &mut RmsProp,
    rng: &mut Rng,
) -> Result<f64> {
    let m = cfg.batch_size;
    let mut real_rows = Vec::with_capacity(m);
    for _ in 0..m {
        let idx = rng.next_index(dataset.len());
        real_rows.push(dataset.points.row(idx).to_vec());
    }
    let real = Matrix::from_rows(&real_rows)?;
    let z = rng.sample_normal(m, cfg.z_dim)?;
    let (fake, _) = g_net.forward_values(&z)?;

    let mut tape = Tape::new();
    let real_node = tape.constant(real.clone());
    let fake_node = tape.constant(fake.clone());
    let d_params = d_net.param_leaves(&mut tape);
    let real_fwd = d_net.forward_graph_with(&mut tape, real_node, &d_params)?;
    let fake_fwd = d_net.forward_graph_with(&mut tape, fake_node, &d_params)?;
    let objective =
        discriminator_objective(&mut tape, real_fwd.output, fake_fwd.output, cfg.loss_kind)?;

    let loss = match cfg.loss_kind {
        LossKind::Nonsaturating => objective,
        LossKind::WganGp => {
            // Interpolates between real and fake rows, penalizing critic
            // gradients away from unit norm.
            let mut alpha = Matrix::zeros(m, 1);
            for r in 0..m {
                alpha.set(r, 0, rng.next_f64());
            }
            let one_minus = alpha.map(|a| 1.0 - a);
            let alpha_node = tape.constant(alpha);
            let om_node = tape.constant(one_minus);
            let real_part = tape.scale_rows(real_node, alpha_node)?;
            let fake_part = tape.scale_rows(fake_node, om_node)?;
            let x_hat = tape.add(real_part, fake_part)?;
            let hat_fwd = d_net.forward_graph_with(&mut tape, x_hat, &d_params)?;
            let gx = d_net.input_gradient_graph(&mut tape, &hat_fwd)?;
            let ss = tape.row_sum_sq(gx);
            let ss_safe = tape.clamp_min(ss, 1e-24);
            let norms = tape.sqrt(ss_safe)?;
            let shifted = tape.add_const(norms, -1.0);
            let sq = tape.mul(shifted, shifted)?;
            let gp = tape.mean(sq)?;
            let neg = tape.scale(objective, -1.0);
            let weighted_gp = tape.scale(gp, cfg.gp_weight);
            tape.add(neg, weighted_gp)?
        }
    };

    tape.backward(loss)?;
    let grads = read_grads(&tape, &d_params);
    opt_d.step(d_net, &grads);
    tape.value(loss).scalar_value()
}

struct GeneratorStepOutput {
    total: f64,
    original: f64,
    fake: Matrix,
    features_g: Matrix,
    features_d: Matrix,
    grads: Vec<(Matrix, Matrix)>,
}

fn generator_step(
    cfg: &GanConfig,
    z: &Matrix,
    g_net: &MlpNetwork,
    d_net: &MlpNetwork,
    mode: GeneratorLossMode,
) -> Result<GeneratorStepOutput> {
    let mut tape = Tape::new();
    let z_node = tape.constant(z.clone());
    let g_params = g_net.param_leaves(&mut tape);
    let g_fwd = g_net.forward_graph_with(&mut tape, z_node, &g_params)?;
    let d_params = d_net.param_constants(&mut tape);
    let d_fwd = d_net.forward_graph_with(&mut tape, g_fwd.output, &d_params)?;
    let features_g = g_fwd.hidden[cfg.tap_layer_g];
    let features_d = d_fwd.hidden[cfg.tap_layer_d];

    let (total, original) = match mode {
        GeneratorLossMode::Composed => {
            let terms = generator_objective(
                &mut tape,
                d_fwd.output,
                features_g,
                features_d,
                &cfg.regularizer,
                cfg.loss_kind,
            )?;
            (terms.total, terms.original)
        }
        GeneratorLossMode::OriginalOnly => {
            let ori = generator_original_loss(&mut tape, d_fwd.output, cfg.loss_kind)?;
            (ori, ori)
        }
    };

    tape.backward(total)?;
    let grads = read_grads(&tape, &g_params);
    Ok(GeneratorStepOutput {
        total: tape.value(total).scalar_value()?,
        original: tape.value(original).scalar_value()?,
        fake: tape.value(g_fwd.output).clone(),
        features_g: tape.value(features_g).clone(),
        features_d: tape.value(features_d).clone(),
        grads,
    })
}

fn build_record(
    cfg: &GanConfig,
    dataset: &LabeledDataset,
    step: usize,
    d_loss: f64,
    g_out: &GeneratorStepOutput,
) -> Result<MetricsRecord> {
    let reg = &cfg.regularizer;
    let l_uni_g = uniformity_loss_value(
        &g_out.features_g,
        reg.gamma,
        reg.normalize_features,
        reg.variance_floor,
    )?;
    let l_uni_d = uniformity_loss_value(
        &g_out.features_d,
        reg.gamma,
        reg.normalize_features,
        reg.variance_floor,
    )?;
    let h_g = batch_entropy_value(&g_out.features_g, reg.variance_floor)?;
    let h_d = batch_entropy_value(&g_out.features_d, reg.variance_floor)?;
    // The diagnostic pair: average pairwise potential at gamma = 2 and the
    // entropy surrogate of the average feature row.
    let pairwise_potential = pairwise_potential_metric(&g_out.features_g, 2.0)?;
    let avg_feature: Vec<f64> = (0..g_out.features_g.cols())
        .map(|c| {
            (0..g_out.features_g.rows())
                .map(|r| g_out.features_g.get(r, c))
                .sum::<f64>()
                / g_out.features_g.rows() as f64
        })
        .collect();
    let batch_entropy_metric = entropy_surrogate_value(&avg_feature, reg.variance_floor)?;
    let (modes, hq) = mode_coverage(&g_out.fake, &dataset.mode_centers, dataset.mode_sigma)?;
    Ok(MetricsRecord {
        step,
        d_loss,
        g_loss_total: g_out.total,
        g_loss_ori: g_out.original,
        l_uni_g,
        l_uni_d,
        h_g,
        h_d,
        pairwise_potential,
        batch_entropy_metric,
        mode_coverage: modes,
        high_quality_fraction: hq,
    })
}

/// Central-difference spot check of a handful of generator coordinates
/// against the gradients the optimizer is about to apply.
fn verify_generator_gradients(
    cfg: &GanConfig,
    z: &Matrix,
    g_net: &MlpNetwork,
    d_net: &MlpNetwork,
    mode: GeneratorLossMode,
    analytic: &[(Matrix, Matrix)],
    rng: &mut Rng,
) -> Result<()> {
    let eval = |candidate: &MlpNetwork| -> Result<f64> {
        let mut tape = Tape::new();
        let z_node = tape.constant(z.clone());
        let g_params = candidate.param_leaves(&mut tape);
        let g_fwd = candidate.forward_graph_with(&mut tape, z_node, &g_params)?;
        let d_params = d_net.param_constants(&mut tape);
        let d_fwd = d_net.forward_graph_with(&mut tape, g_fwd.output, &d_params)?;
        let total = match mode {
            GeneratorLossMode::Composed => {
                generator_objective(
                    &mut tape,
                    d_fwd.output,
                    g_fwd.hidden[cfg.tap_layer_g],
                    d_fwd.hidden[cfg.tap_layer_d],
                    &cfg.regularizer,
                    cfg.loss_kind,
                )?
                .total
            }
            GeneratorLossMode::OriginalOnly => {
                generator_original_loss(&mut tape, d_fwd.output, cfg.loss_kind)?
            }
        };
        tape.value(total).scalar_value()
    };

    let h = 1e-5;
    for _ in 0..10 {
        let layer = rng.next_index(g_net.n_layers());
        let (wg, _) = &analytic[layer];
        let coord = rng.next_index(wg.len());
        let mut plus = g_net.clone();
        let mut minus = g_net.clone();
        {
            let w = plus.layers_mut().nth(layer).unwrap().0;
            w.as_mut_slice()[coord] += h;
        }
        {
            let w = minus.layers_mut().nth(layer).unwrap().0;
            w.as_mut_slice()[coord] -= h;
        }
        let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
        let got = wg.as_slice()[coord];
        let rel = (got - fd).abs() / fd.abs().max(1.0);
        if rel > 1e-3 {
            return Err(Error::InvalidArgument(format!(
                "gradient verification failed at layer {layer} coord {coord}: analytic {got}, central difference {fd} (relative error {rel:.2e})"
            )));
        }
    }
    Ok(())
}

/// Samples CSV: header `x0,...,x{d-1}`, 17-significant-digit values.
fn save_samples(path: &Path, samples: &Matrix) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let header: Vec<String> = (0..samples.cols()).map(|c| format!("x{c}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for r in 0..samples.rows() {
        let row: Vec<String> = samples.row(r).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub const PARAMS_MAGIC: &str = "UNIGAN-PARAMS v1";

/// Text dump of named parameter matrices: a magic line, then per matrix a
/// `name rows cols` line followed by one line per row.
pub fn save_params(path: &Path, nets: &[&MlpNetwork]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{PARAMS_MAGIC}")?;
    for net in nets {
        let set = net.to_parameter_set();
        for (name, m) in set.iter() {
            writeln!(w, "{name} {} {}", m.rows(), m.cols())?;
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.16e}")).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read back a parameter dump as `(name, matrix)` pairs.
pub fn load_params(path: &Path) -> Result<Vec<(String, Matrix)>> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, line)) if line == PARAMS_MAGIC => {}
        Some((_, line)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("bad magic {line:?}, expected {PARAMS_MAGIC:?}"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty params file".to_string(),
            })
        }
    }
    let mut out = Vec::new();
    while let Some((idx, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected `name rows cols`, found {header:?}"),
            });
        }
        let name = parts[0].to_string();
        let rows: usize = parts[1].parse().map_err(|e| Error::Parse {
            line: idx + 1,
            msg: format!("bad row count: {e}"),
        })?;
        let cols: usize = parts[2].parse().map_err(|e| Error::Parse {
            line: idx + 1,
            msg: format!("bad col count: {e}"),
        })?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ridx, line) = lines.next().ok_or(Error::Parse {
                line: idx + 1,
                msg: format!("truncated matrix {name}"),
            })?;
            for field in line.split_whitespace() {
                data.push(field.parse::<f64>().map_err(|e| Error::Parse {
                    line: ridx + 1,
                    msg: format!("bad number {field:?}: {e}"),
                })?);
            }
        }
        out.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    Ok(out)
}
