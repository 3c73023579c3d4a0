//! Principal component projection via Jacobi eigendecomposition.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Eigenvalues and orthonormal eigenvectors (columns) of a symmetric
/// matrix, by cyclic Jacobi rotations, sorted by descending eigenvalue.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if a.rows() != a.cols() {
        return Err(Error::shape("symmetric_eigen", a.shape_str(), "square"));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }

    let frob: f64 = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * frob.max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).abs();
            }
        }
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m.get(i, p);
                    let miq = m.get(i, q);
                    m.set(i, p, c * mip - s * miq);
                    m.set(i, q, s * mip + c * miq);
                }
                for i in 0..n {
                    let mpi = m.get(p, i);
                    let mqi = m.get(q, i);
                    m.set(p, i, c * mpi - s * mqi);
                    m.set(q, i, s * mpi + c * mqi);
                }
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        // Fix sign: largest-magnitude entry positive, for determinism.
        let mut pivot = 0;
        for i in 0..n {
            if v.get(i, old_col).abs() > v.get(pivot, old_col).abs() {
                pivot = i;
            }
        }
        let sign = if v.get(pivot, old_col) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors.set(i, new_col, sign * v.get(i, old_col));
        }
    }
    Ok((eigenvalues, vectors))
}

/// Project centered data onto its top principal directions.
pub fn pca_project(features: &Matrix, out_dims: usize) -> Result<Matrix> {
    let (n, d) = features.shape();
    if out_dims == 0 || out_dims > d {
        return Err(Error::InvalidArgument(format!(
            "pca_project: out_dims must be in 1..={d}, got {out_dims}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("pca_project: empty input".to_string()));
    }
    let mut centered = features.clone();
    for c in 0..d {
        let mean = (0..n).map(|r| features.get(r, c)).sum::<f64>() / n as f64;
        for r in 0..n {
            centered.set(r, c, centered.get(r, c) - mean);
        }
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = centered.transpose().matmul(&centered)?;
    for v in cov.as_mut_slice() {
        *v /= denom;
    }
    let (_, vectors) = symmetric_eigen(&cov)?;
    let mut basis = Matrix::zeros(d, out_dims);
    for c in 0..out_dims {
        for r in 0..d {
            basis.set(r, c, vectors.get(r, c));
        }
    }
    centered.matmul(&basis)
}
