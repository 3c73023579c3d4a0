//! GAN training with uniformity and entropy regularization.

mod coverage;
mod mlp;
mod objectives;
mod train;

pub use coverage::mode_coverage;
pub use mlp::{feature_tap, Activation, MlpForward, MlpNetwork, LEAKY_SLOPE};
pub use objectives::{
    discriminator_objective, generator_objective, generator_original_loss, GeneratorLossTerms,
    LossKind,
};
pub use train::{
    load_params, save_params, train, GanConfig, GeneratorLossMode, MetricsRecord, RunSummary,
    PARAMS_MAGIC,
};
