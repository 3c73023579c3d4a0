//! Latent structural causal model testbed.
//!
//! The generative process: latents split into content `c` and noise `eps`;
//! an injective mixing network maps `(c, eps)` to observations. A
//! counterfactual partner resamples the noise coordinates in a random
//! nonempty subset `A` through a smooth, fully supported conditional while
//! the content is shared exactly. An encoder trained to align pairs while
//! maximizing output entropy should recover the content block, which
//! [`block_identifiability_score`] measures against ground truth.

mod bench;
mod darmois;
mod encoder;
mod identifiability;
mod stats;

pub use bench::{save_pairs, scm_bench, ScmBenchConfig, ScmBenchReport};
pub use darmois::{darmois_map, normal_cdf, GenerativeFamily};
pub use encoder::{
    alignment_value, encoder_entropy_estimate, train_alignmax_encoder, AlignMaxConfig, Encoder,
    EntropyEstimator,
};
pub use identifiability::{block_identifiability_score, regression_r2};
pub use stats::{knn_entropy, ks_critical_value, ks_statistic_uniform};

use serde::{Deserialize, Serialize};

use crate::analysis::symmetric_eigen;
use crate::error::{Error, Result};
use crate::gan::{Activation, MlpNetwork};
use crate::numerics::{Matrix, Rng};

/// Dimensions and distributions of the latent SCM.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScmSpec {
    /// Content dimension.
    pub d_c: usize,
    /// Noise dimension.
    pub d_eps: usize,
    /// Observation dimension; must be at least `d_c + d_eps` so the mixing
    /// network can be injective.
    pub obs_dim: usize,
    /// Number of weight layers in the mixing network.
    pub mixing_layers: usize,
    /// Noise refresh weight: resampled coordinates become
    /// `(1 - rho) * eps + rho * fresh`.
    pub rho: f64,
    /// Per-coordinate inclusion probability of the intervention subset,
    /// conditioned on the subset being nonempty.
    pub p_include: f64,
    /// Injectivity threshold on each weight matrix's smallest singular
    /// value.
    pub min_singular_value: f64,
}

impl Default for ScmSpec {
    fn default() -> Self {
        ScmSpec {
            d_c: 2,
            d_eps: 2,
            obs_dim: 6,
            mixing_layers: 3,
            rho: 0.8,
            p_include: 0.5,
            min_singular_value: 1e-3,
        }
    }
}

impl ScmSpec {
    pub fn latent_dim(&self) -> usize {
        self.d_c + self.d_eps
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_c == 0 || self.d_eps == 0 {
            return Err(Error::InvalidArgument(
                "d_c and d_eps must be positive".to_string(),
            ));
        }
        if self.obs_dim < self.latent_dim() {
            return Err(Error::InvalidArgument(format!(
                "obs_dim {} is smaller than the latent dimension {}; the mixing cannot be injective",
                self.obs_dim,
                self.latent_dim()
            )));
        }
        if self.mixing_layers == 0 {
            return Err(Error::InvalidArgument(
                "mixing_layers must be positive".to_string(),
            ));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho must lie in (0, 1], got {}",
                self.rho
            )));
        }
        if !(self.p_include > 0.0 && self.p_include <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p_include must lie in (0, 1] so every coordinate can be intervened on, got {}",
                self.p_include
            )));
        }
        if self.min_singular_value <= 0.0 {
            return Err(Error::InvalidArgument(
                "min_singular_value must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// One factual/counterfactual observation pair with its ground truth.
#[derive(Debug, Clone)]
pub struct CounterfactualPair {
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub c: Vec<f64>,
    pub eps: Vec<f64>,
    pub eps_tilde: Vec<f64>,
    pub a_mask: Vec<bool>,
}

/// Column-aligned batch of counterfactual pairs.
#[derive(Debug, Clone)]
pub struct PairSet {
    pub x: Matrix,
    pub x_tilde: Matrix,
    pub c: Matrix,
    pub eps: Matrix,
    pub eps_tilde: Matrix,
    /// 0/1 intervention mask per pair and noise coordinate.
    pub a_mask: Matrix,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn pair(&self, i: usize) -> CounterfactualPair {
        CounterfactualPair {
            x: self.x.row(i).to_vec(),
            x_tilde: self.x_tilde.row(i).to_vec(),
            c: self.c.row(i).to_vec(),
            eps: self.eps.row(i).to_vec(),
            eps_tilde: self.eps_tilde.row(i).to_vec(),
            a_mask: self.a_mask.row(i).iter().map(|&v| v != 0.0).collect(),
        }
    }

    /// Rows `start..end` as a new set.
    pub fn slice(&self, start: usize, end: usize) -> Result<PairSet> {
        let take = |m: &Matrix| -> Result<Matrix> {
            let rows: Vec<Vec<f64>> = (start..end).map(|r| m.row(r).to_vec()).collect();
            Matrix::from_rows(&rows)
        };
        Ok(PairSet {
            x: take(&self.x)?,
            x_tilde: take(&self.x_tilde)?,
            c: take(&self.c)?,
            eps: take(&self.eps)?,
            eps_tilde: take(&self.eps_tilde)?,
            a_mask: take(&self.a_mask)?,
        })
    }
}

/// A spec plus its realized mixing network.
#[derive(Debug, Clone)]
pub struct Scm {
    spec: ScmSpec,
    mixing: MlpNetwork,
}

impl Scm {
    /// Build the mixing network: square-or-tall leaky-relu layers, redrawn
    /// until every weight matrix's smallest singular value clears the
    /// threshold, so the map is injective by construction.
    pub fn new(spec: ScmSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut dims = vec![spec.latent_dim()];
        dims.extend(std::iter::repeat(spec.obs_dim).take(spec.mixing_layers));
        let base = Rng::new(seed);
        for attempt in 0..64 {
            let mut rng = base.substream(attempt);
            let net = MlpNetwork::init("mix", &dims, Activation::LeakyRelu, &mut rng)?;
            let conditioned = (0..net.n_layers()).all(|k| {
                smallest_singular_value(net.weight(k))
                    .map_or(false, |s| s > spec.min_singular_value)
            });
            if conditioned {
                return Ok(Scm { spec, mixing: net });
            }
        }
        Err(Error::InvalidArgument(
            "could not draw a well-conditioned mixing network".to_string(),
        ))
    }

    pub fn spec(&self) -> &ScmSpec {
        &self.spec
    }

    pub fn mixing(&self) -> &MlpNetwork {
        &self.mixing
    }

    /// Observation for a batch of latent rows `(c, eps)`.
    pub fn observe(&self, c: &Matrix, eps: &Matrix) -> Result<Matrix> {
        let n = c.rows();
        let mut z = Matrix::zeros(n, self.spec.latent_dim());
        for r in 0..n {
            z.row_mut(r)[..self.spec.d_c].copy_from_slice(c.row(r));
            z.row_mut(r)[self.spec.d_c..].copy_from_slice(eps.row(r));
        }
        let (out, _) = self.mixing.forward_values(&z)?;
        Ok(out)
    }

    /// Draw counterfactual pairs. Content is shared within each pair;
    /// noise coordinates inside the intervention subset are refreshed
    /// through the smooth conditional, the rest copied exactly.
    pub fn sample(&self, n_pairs: usize, rng: &mut Rng) -> Result<PairSet> {
        if n_pairs == 0 {
            return Err(Error::InvalidArgument("n_pairs must be positive".to_string()));
        }
        let spec = &self.spec;
        let c = rng.sample_normal(n_pairs, spec.d_c)?;
        let eps = rng.sample_normal(n_pairs, spec.d_eps)?;
        let mut a_mask = Matrix::zeros(n_pairs, spec.d_eps);
        for r in 0..n_pairs {
            loop {
                let mut any = false;
                for l in 0..spec.d_eps {
                    let include = rng.next_f64() < spec.p_include;
                    a_mask.set(r, l, if include { 1.0 } else { 0.0 });
                    any |= include;
                }
                if any {
                    break;
                }
            }
        }
        let fresh = rng.sample_normal(n_pairs, spec.d_eps)?;
        let mut eps_tilde = eps.clone();
        for r in 0..n_pairs {
            for l in 0..spec.d_eps {
                if a_mask.get(r, l) != 0.0 {
                    let v = (1.0 - spec.rho) * eps.get(r, l) + spec.rho * fresh.get(r, l);
                    eps_tilde.set(r, l, v);
                }
            }
        }
        let x = self.observe(&c, &eps)?;
        let x_tilde = self.observe(&c, &eps_tilde)?;
        Ok(PairSet {
            x,
            x_tilde,
            c,
            eps,
            eps_tilde,
            a_mask,
        })
    }
}

/// Convenience wrapper matching the operation name: build the SCM for
/// `seed` and draw `n_pairs` pairs with `rng`.
pub fn sample_scm(spec: &ScmSpec, n_pairs: usize, seed: u64, rng: &mut Rng) -> Result<PairSet> {
    Scm::new(spec.clone(), seed)?.sample(n_pairs, rng)
}

/// Smallest singular value, from the spectrum of the smaller Gram matrix
/// so rank-deficient directions of a rectangular matrix do not read as
/// zero singular values. For the row-vector convention `x -> x W`,
/// injectivity needs exactly this value (over `min(rows, cols)` singular
/// values) to be positive with `rows <= cols`.
pub fn smallest_singular_value(w: &Matrix) -> Result<f64> {
    let gram = if w.rows() <= w.cols() {
        w.matmul(&w.transpose())?
    } else {
        w.transpose().matmul(w)?
    };
    let (eigenvalues, _) = symmetric_eigen(&gram)?;
    let min = eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    Ok(min.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_is_shared_and_off_mask_noise_copied_exactly() {
        let scm = Scm::new(ScmSpec::default(), 3).unwrap();
        let mut rng = Rng::new(4);
        let pairs = scm.sample(200, &mut rng).unwrap();
        for i in 0..pairs.len() {
            let p = pairs.pair(i);
            for l in 0..p.a_mask.len() {
                if !p.a_mask[l] {
                    assert_eq!(p.eps[l].to_bits(), p.eps_tilde[l].to_bits());
                }
            }
        }
    }

    #[test]
    fn every_noise_coordinate_is_intervened_with_positive_frequency() {
        let scm = Scm::new(ScmSpec::default(), 3).unwrap();
        let mut rng = Rng::new(5);
        let pairs = scm.sample(10_000, &mut rng).unwrap();
        for l in 0..scm.spec().d_eps {
            let count: f64 = (0..pairs.len()).map(|r| pairs.a_mask.get(r, l)).sum();
            let freq = count / pairs.len() as f64;
            assert!(freq > 0.0, "coordinate {l} never intervened");
            // Bernoulli(1/2) conditioned on nonempty: expect ~2/3 for d=2.
            assert!((freq - 2.0 / 3.0).abs() < 0.02, "coordinate {l}: {freq}");
        }
        for r in 0..pairs.len() {
            let total: f64 = (0..scm.spec().d_eps).map(|l| pairs.a_mask.get(r, l)).sum();
            assert!(total >= 1.0, "empty intervention subset at row {r}");
        }
    }

    #[test]
    fn intervened_coordinates_change() {
        let scm = Scm::new(ScmSpec::default(), 3).unwrap();
        let mut rng = Rng::new(6);
        let pairs = scm.sample(500, &mut rng).unwrap();
        for i in 0..pairs.len() {
            let p = pairs.pair(i);
            for l in 0..p.a_mask.len() {
                if p.a_mask[l] {
                    assert_ne!(p.eps[l], p.eps_tilde[l]);
                }
            }
        }
    }

    #[test]
    fn observations_respect_the_mixing() {
        let scm = Scm::new(ScmSpec::default(), 3).unwrap();
        let mut rng = Rng::new(7);
        let pairs = scm.sample(50, &mut rng).unwrap();
        let x_again = scm.observe(&pairs.c, &pairs.eps).unwrap();
        assert_eq!(pairs.x, x_again);
        assert_eq!(pairs.x.cols(), scm.spec().obs_dim);
    }

    #[test]
    fn mixing_weights_are_well_conditioned() {
        let scm = Scm::new(ScmSpec::default(), 3).unwrap();
        for k in 0..scm.mixing().n_layers() {
            let s = smallest_singular_value(scm.mixing().weight(k)).unwrap();
            assert!(s > 1e-3, "layer {k}: sigma_min {s}");
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let spec = ScmSpec {
            obs_dim: 3,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = ScmSpec {
            p_include: 0.0,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = ScmSpec {
            rho: 1.5,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn singular_value_matches_known_matrix() {
        // diag(3, 2) embedded in a 3x2 tall matrix has sigma_min = 2.
        let w = Matrix::from_vec(3, 2, vec![3.0, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        let s = smallest_singular_value(&w).unwrap();
        assert!((s - 2.0).abs() < 1e-10, "{s}");
    }
}
