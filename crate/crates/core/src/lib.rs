//! Uniformity and entropy regularization for small GANs.
//!
//! The crate provides:
//!
//! - [`numerics`]: dense matrices, a reverse-mode differentiation tape over
//!   a closed operator set, counter-based seeded sampling, and a
//!   finite-difference gradient checker.
//! - [`regularizers`]: the uniformity loss (log average pairwise Gaussian
//!   potential) and the entropy surrogate (half log feature variance with
//!   norm rescaling), both as differentiable graph builders and as
//!   evaluation-only metrics.
//! - [`gan`]: a small MLP generator/discriminator pair, adversarial
//!   objectives, feature taps, the composed generator loss, a deterministic
//!   training loop with JSONL metrics, and a mode-coverage proxy.
//! - [`scm`]: a latent structural causal model that emits counterfactual
//!   pairs, the Darmois (conditional-CDF) reference encoder, an encoder
//!   trained on the alignment-plus-entropy objective, and block
//!   identifiability scoring.
//! - [`analysis`]: k-means, PCA projection, the sine/cosine circle map, and
//!   the sphere uniformity descent experiment with uniform baselines.
//! - [`data`]: synthetic multi-mode datasets and exact-round-trip feature
//!   CSV IO.

pub mod analysis;
pub mod data;
pub mod error;
pub mod gan;
pub mod numerics;
pub mod regularizers;
pub mod scm;
pub mod verification;

pub use error::{Error, Result};
