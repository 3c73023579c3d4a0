//! Mode coverage: a small-scale generation-quality proxy.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Counts how many mixture modes a sample set recovers.
///
/// A sample is high-quality if it lies within `3 * sigma` of its nearest
/// center; a mode counts as hit if at least `N / (5 K)` high-quality
/// samples map to it. Returns `(modes_hit, high_quality_fraction)`.
pub fn mode_coverage(
    samples: &Matrix,
    mode_centers: &Matrix,
    sigma: f64,
) -> Result<(usize, f64)> {
    let k = mode_centers.rows();
    if k == 0 {
        return Err(Error::InvalidArgument(
            "mode_coverage: no mode centers".to_string(),
        ));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "mode_coverage: sigma must be positive, got {sigma}"
        )));
    }
    if samples.cols() != mode_centers.cols() {
        return Err(Error::shape(
            "mode_coverage",
            samples.shape_str(),
            mode_centers.shape_str(),
        ));
    }
    let n = samples.rows();
    if n == 0 {
        return Ok((0, 0.0));
    }
    let radius2 = (3.0 * sigma) * (3.0 * sigma);
    let mut per_mode = vec![0usize; k];
    let mut high_quality = 0usize;
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = Matrix::row_sqdist(samples, i, mode_centers, c);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if best_d <= radius2 {
            high_quality += 1;
            per_mode[best] += 1;
        }
    }
    let threshold = n as f64 / (5.0 * k as f64);
    let modes_hit = per_mode
        .iter()
        .filter(|&&count| count as f64 >= threshold)
        .count();
    Ok((modes_hit, high_quality as f64 / n as f64))
}
