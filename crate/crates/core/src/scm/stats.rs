//! Kolmogorov-Smirnov uniformity test and the Kozachenko-Leonenko
//! nearest-neighbor entropy estimator.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// One-sample KS statistic against uniform(0, 1):
/// `D = sup_x |F_n(x) - x|` over the sample points.
pub fn ks_statistic_uniform(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = x.clamp(0.0, 1.0);
        let upper = (i as f64 + 1.0) / n - f;
        let lower = f - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    d
}

/// Approximate critical value of the one-sample KS statistic (Stephens):
/// `c(alpha) / (sqrt(n) + 0.12 + 0.11 / sqrt(n))`. Supported levels:
/// 0.01, 0.05, 0.10.
pub fn ks_critical_value(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("ks_critical_value: n must be positive".to_string()));
    }
    let c = if (alpha - 0.01).abs() < 1e-12 {
        1.628
    } else if (alpha - 0.05).abs() < 1e-12 {
        1.358
    } else if (alpha - 0.10).abs() < 1e-12 {
        1.224
    } else {
        return Err(Error::InvalidArgument(format!(
            "ks_critical_value: unsupported alpha {alpha} (use 0.01, 0.05 or 0.10)"
        )));
    };
    let sqrt_n = (n as f64).sqrt();
    Ok(c / (sqrt_n + 0.12 + 0.11 / sqrt_n))
}

/// Kozachenko-Leonenko differential entropy estimate from k-th nearest
/// neighbor distances (Euclidean balls):
/// `H = psi(N) - psi(k) + log V_d + (d/N) sum_i log r_i`.
/// Zero distances (duplicate points) are clamped at 1e-15.
pub fn knn_entropy(samples: &Matrix, k: usize) -> Result<f64> {
    let (n, d) = samples.shape();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "knn_entropy: k must be in 1..{n}, got {k}"
        )));
    }
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "knn_entropy: need at least 10 samples, got {n}"
        )));
    }
    let log_unit_ball =
        0.5 * d as f64 * std::f64::consts::PI.ln() - ln_gamma(d as f64 / 2.0 + 1.0);
    let mut log_dist_sum = 0.0;
    let mut dist2 = vec![0.0f64; n];
    for i in 0..n {
        for (j, slot) in dist2.iter_mut().enumerate() {
            *slot = if i == j {
                f64::INFINITY
            } else {
                Matrix::row_sqdist(samples, i, samples, j)
            };
        }
        // k-th smallest via partial selection.
        let mut working = dist2.clone();
        let (_, kth, _) = working.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
        let r = kth.sqrt().max(1e-15);
        log_dist_sum += r.ln();
    }
    Ok(digamma(n as f64) - digamma(k as f64) + log_unit_ball + d as f64 / n as f64 * log_dist_sum)
}
