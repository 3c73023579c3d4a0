//! Central-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Named collection of parameter matrices, the unit over which losses are
/// evaluated and differentiated.
#[derive(Debug, Clone, Default)]
pub struct ParameterSet {
    entries: Vec<(String, Matrix)>,
}

impl ParameterSet {
    pub fn new() -> Self {
        ParameterSet { entries: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Matrix) {
        self.entries.push((name.into(), value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn get(&self, idx: usize) -> (&str, &Matrix) {
        let (n, m) = &self.entries[idx];
        (n.as_str(), m)
    }

    pub fn matrix_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.entries[idx].1
    }

    /// Total number of scalar coordinates.
    pub fn coord_count(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.len()).sum()
    }

    /// Zero matrices of the same shapes, for collecting gradients.
    pub fn zeros_like(&self) -> ParameterSet {
        ParameterSet {
            entries: self
                .entries
                .iter()
                .map(|(n, m)| (n.clone(), Matrix::zeros(m.rows(), m.cols())))
                .collect(),
        }
    }
}

/// Maximum over coordinates of `|g_analytic - g_fd| / max(1, |g_fd|)` where
/// `g_fd` is the central difference `(f(t+h) - f(t-h)) / 2h`.
///
/// `f` must evaluate the scalar objective at arbitrary parameter values;
/// `analytic` holds the gradient under test, shape-matched to `theta`.
pub fn finite_diff_check<F>(
    f: F,
    theta: &ParameterSet,
    analytic: &ParameterSet,
    h: f64,
) -> Result<f64>
where
    F: Fn(&ParameterSet) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "finite_diff_check: step must be positive, got {h}"
        )));
    }
    if theta.len() != analytic.len() {
        return Err(Error::shape("finite_diff_check", theta.len(), analytic.len()));
    }
    let mut worst: f64 = 0.0;
    let mut probe = theta.clone();
    for p in 0..theta.len() {
        let (name, grad) = analytic.get(p);
        let n = grad.len();
        if grad.shape() != theta.get(p).1.shape() {
            return Err(Error::shape(
                "finite_diff_check",
                theta.get(p).1.shape_str(),
                format!("{name}: {}", grad.shape_str()),
            ));
        }
        for c in 0..n {
            let orig = probe.get(p).1.as_slice()[c];
            probe.matrix_mut(p).as_mut_slice()[c] = orig + h;
            let plus = f(&probe)?;
            probe.matrix_mut(p).as_mut_slice()[c] = orig - h;
            let minus = f(&probe)?;
            probe.matrix_mut(p).as_mut_slice()[c] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("finite_diff_check at {name}[{c}]"),
                });
            }
            let fd = (plus - minus) / (2.0 * h);
            let rel = (grad.as_slice()[c] - fd).abs() / fd.abs().max(1.0);
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}
