//! Adversarial objectives and the composed generator loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{NodeId, Tape};
use crate::regularizers::{batch_entropy_node, uniformity_loss_node, RegularizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    WganGp,
    Nonsaturating,
}

/// Discriminator objective.
///
/// - `wgan_gp`: returns `mean(real) - mean(fake)`, the quantity the critic
///   maximizes; the training step negates it and adds the gradient penalty.
/// - `nonsaturating`: returns `-[mean log s(real) + mean log(1 - s(fake))]`,
///   a loss the discriminator minimizes directly.
pub fn discriminator_objective(
    tape: &mut Tape,
    real_scores: NodeId,
    fake_scores: NodeId,
    kind: LossKind,
) -> Result<NodeId> {
    let (r, f) = (tape.value(real_scores), tape.value(fake_scores));
    if r.shape() != f.shape() || r.cols() != 1 {
        return Err(Error::shape(
            "discriminator_objective",
            r.shape_str(),
            f.shape_str(),
        ));
    }
    match kind {
        LossKind::WganGp => {
            let mr = tape.mean(real_scores)?;
            let mf = tape.mean(fake_scores)?;
            tape.sub(mr, mf)
        }
        LossKind::Nonsaturating => {
            // log(1 - s(x)) = log s(-x)
            let ls_real = tape.log_sigmoid(real_scores);
            let neg_fake = tape.scale(fake_scores, -1.0);
            let ls_fake = tape.log_sigmoid(neg_fake);
            let mr = tape.mean(ls_real)?;
            let mf = tape.mean(ls_fake)?;
            let s = tape.add(mr, mf)?;
            Ok(tape.scale(s, -1.0))
        }
    }
}

/// The generator's original adversarial loss, to minimize:
/// `-mean(fake_scores)` for the Wasserstein form, `-mean log s(fake)` for
/// the nonsaturating form.
pub fn generator_original_loss(
    tape: &mut Tape,
    fake_scores: NodeId,
    kind: LossKind,
) -> Result<NodeId> {
    match kind {
        LossKind::WganGp => {
            let m = tape.mean(fake_scores)?;
            Ok(tape.scale(m, -1.0))
        }
        LossKind::Nonsaturating => {
            let ls = tape.log_sigmoid(fake_scores);
            let m = tape.mean(ls)?;
            Ok(tape.scale(m, -1.0))
        }
    }
}

/// Node handles for each term of the composed generator loss.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorLossTerms {
    pub total: NodeId,
    pub original: NodeId,
    pub uni_g: NodeId,
    pub uni_d: NodeId,
    pub ent_g: NodeId,
    pub ent_d: NodeId,
}

/// Composed generator loss:
/// `L_ori + lambda_g L_uni(f_g) + lambda_d L_uni(f_d)
///  - delta_g H(f_g) - delta_d H(f_d)`
/// over features tapped from the current fake batch. Terms are combined in
/// this fixed order; zero weights contribute exact floating-point zeros, so
/// the total equals the plain original loss bit for bit when all weights
/// vanish.
pub fn generator_objective(
    tape: &mut Tape,
    fake_scores: NodeId,
    features_g: NodeId,
    features_d: NodeId,
    reg: &RegularizerConfig,
    kind: LossKind,
) -> Result<GeneratorLossTerms> {
    reg.validate()?;
    let m = tape.value(fake_scores).rows();
    if tape.value(features_g).rows() != m || tape.value(features_d).rows() != m {
        return Err(Error::shape(
            "generator_objective",
            format!("{m} fake scores"),
            format!(
                "feature batches {} / {}",
                tape.value(features_g).shape_str(),
                tape.value(features_d).shape_str()
            ),
        ));
    }
    let original = generator_original_loss(tape, fake_scores, kind)?;
    let uni_g = uniformity_loss_node(
        tape,
        features_g,
        reg.gamma,
        reg.normalize_features,
        reg.variance_floor,
    )?;
    let uni_d = uniformity_loss_node(
        tape,
        features_d,
        reg.gamma,
        reg.normalize_features,
        reg.variance_floor,
    )?;
    let ent_g = batch_entropy_node(tape, features_g, reg.variance_floor)?;
    let ent_d = batch_entropy_node(tape, features_d, reg.variance_floor)?;

    let ug = tape.scale(uni_g, reg.lambda_g);
    let t1 = tape.add(original, ug)?;
    let ud = tape.scale(uni_d, reg.lambda_d);
    let t2 = tape.add(t1, ud)?;
    let eg = tape.scale(ent_g, reg.delta_g);
    let t3 = tape.sub(t2, eg)?;
    let ed = tape.scale(ent_d, reg.delta_d);
    let total = tape.sub(t3, ed)?;

    Ok(GeneratorLossTerms {
        total,
        original,
        uni_g,
        uni_d,
        ent_g,
        ent_d,
    })
}
