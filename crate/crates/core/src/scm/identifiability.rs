//! Block identifiability scoring by nonlinear regression.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Fixed regression protocol so scores are comparable across runs: inputs
/// standardized on the train split (first 70% of rows), pushed through two
/// frozen random tanh layers of width 128, then the output layer — over
/// [features, standardized input, 1] — is fit by ridge-regularized least
/// squares. The seed of the random layers is a constant, independent of
/// the data.
const HIDDEN_WIDTH: usize = 128;
const TRAIN_FRACTION: f64 = 0.7;
const FEATURE_SEED: u64 = 0xB10C_5C0E;
const RIDGE: f64 = 1e-8;

/// Coefficient of determination of the protocol regressor predicting
/// `c_true` (content) and `eps_true` (noise) from `c_hat`. High content and
/// low noise scores witness "all and only" content information.
pub fn block_identifiability_score(
    c_hat: &Matrix,
    c_true: &Matrix,
    eps_true: &Matrix,
) -> Result<(f64, f64)> {
    let n = c_hat.rows();
    if n < 500 {
        return Err(Error::InvalidArgument(format!(
            "block_identifiability_score: need at least 500 rows, got {n}"
        )));
    }
    if c_true.rows() != n || eps_true.rows() != n {
        return Err(Error::shape(
            "block_identifiability_score",
            n,
            format!("{} / {}", c_true.rows(), eps_true.rows()),
        ));
    }
    let r2_content = regression_r2(c_hat, c_true)?;
    let r2_noise = regression_r2(c_hat, eps_true)?;
    Ok((r2_content, r2_noise))
}

/// Held-out, variance-weighted R^2 of the protocol regressor.
pub fn regression_r2(inputs: &Matrix, targets: &Matrix) -> Result<f64> {
    let n = inputs.rows();
    let n_train = ((n as f64) * TRAIN_FRACTION).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "regression_r2: split degenerate for {n} rows"
        )));
    }

    // Reject constant targets: R^2 is undefined.
    for c in 0..targets.cols() {
        let mean = (0..n).map(|r| targets.get(r, c)).sum::<f64>() / n as f64;
        let var = (0..n).map(|r| (targets.get(r, c) - mean).powi(2)).sum::<f64>() / n as f64;
        if var < 1e-24 {
            return Err(Error::Domain {
                op: "regression_r2",
                msg: format!("target column {c} is constant"),
            });
        }
    }

    // Standardize inputs on the train split.
    let d = inputs.cols();
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for c in 0..d {
        mean[c] = (0..n_train).map(|r| inputs.get(r, c)).sum::<f64>() / n_train as f64;
        let var = (0..n_train)
            .map(|r| (inputs.get(r, c) - mean[c]).powi(2))
            .sum::<f64>()
            / n_train as f64;
        std[c] = var.sqrt().max(1e-12);
    }
    let mut x = inputs.clone();
    for r in 0..n {
        for c in 0..d {
            x.set(r, c, (x.get(r, c) - mean[c]) / std[c]);
        }
    }

    // Frozen random feature layers.
    let mut feat_rng = Rng::new(FEATURE_SEED);
    let w1 = feat_rng
        .sample_normal(d, HIDDEN_WIDTH)?
        .scale((1.0 / d as f64).sqrt());
    let b1 = feat_rng.sample_normal(1, HIDDEN_WIDTH)?.scale(0.1);
    let w2 = feat_rng
        .sample_normal(HIDDEN_WIDTH, HIDDEN_WIDTH)?
        .scale((1.0 / HIDDEN_WIDTH as f64).sqrt());
    let b2 = feat_rng.sample_normal(1, HIDDEN_WIDTH)?.scale(0.1);

    let h1 = affine_tanh(&x, &w1, &b1)?;
    let h2 = affine_tanh(&h1, &w2, &b2)?;

    // Design matrix: [h2, standardized input, 1].
    let k = HIDDEN_WIDTH + d + 1;
    let mut design = Matrix::zeros(n, k);
    for r in 0..n {
        design.row_mut(r)[..HIDDEN_WIDTH].copy_from_slice(h2.row(r));
        design.row_mut(r)[HIDDEN_WIDTH..HIDDEN_WIDTH + d].copy_from_slice(x.row(r));
        design.set(r, k - 1, 1.0);
    }

    let train_design = take_rows(&design, 0, n_train)?;
    let train_targets = take_rows(targets, 0, n_train)?;
    let test_design = take_rows(&design, n_train, n)?;
    let test_targets = take_rows(targets, n_train, n)?;

    // Normal equations with a small ridge, scaled by the train size.
    let mut gram = train_design.transpose().matmul(&train_design)?;
    let lambda = RIDGE * n_train as f64;
    for i in 0..k {
        gram.set(i, i, gram.get(i, i) + lambda);
    }
    let rhs = train_design.transpose().matmul(&train_targets)?;
    let coef = cholesky_solve(&gram, &rhs)?;

    let predictions = test_design.matmul(&coef)?;
    let n_test = test_targets.rows();
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for c in 0..test_targets.cols() {
        let mean = (0..n_test).map(|r| test_targets.get(r, c)).sum::<f64>() / n_test as f64;
        for r in 0..n_test {
            ss_res += (test_targets.get(r, c) - predictions.get(r, c)).powi(2);
            ss_tot += (test_targets.get(r, c) - mean).powi(2);
        }
    }
    Ok(1.0 - ss_res / ss_tot)
}

fn affine_tanh(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mut out = x.matmul(w)?;
    for r in 0..out.rows() {
        for (o, &bias) in out.row_mut(r).iter_mut().zip(b.row(0)) {
            *o = (*o + bias).tanh();
        }
    }
    Ok(out)
}

fn take_rows(m: &Matrix, start: usize, end: usize) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = (start..end).map(|r| m.row(r).to_vec()).collect();
    Matrix::from_rows(&rows)
}

/// Solve `A X = B` for symmetric positive definite `A`.
fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::shape("cholesky_solve", a.shape_str(), b.shape_str()));
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for p in 0..j {
                sum -= l.get(i, p) * l.get(j, p);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Domain {
                        op: "cholesky_solve",
                        msg: format!("matrix not positive definite at pivot {i}"),
                    });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    // Forward then back substitution, one target column at a time.
    let mut x = Matrix::zeros(n, b.cols());
    for c in 0..b.cols() {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b.get(i, c);
            for p in 0..i {
                sum -= l.get(i, p) * y[p];
            }
            y[i] = sum / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for p in (i + 1)..n {
                sum -= l.get(p, i) * x.get(p, c);
            }
            x.set(i, c, sum / l.get(i, i));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_data(n: usize, d: usize, seed: u64) -> Matrix {
        Rng::new(seed).sample_normal(n, d).unwrap()
    }

    #[test]
    fn cholesky_solves_known_system() {
        let a = Matrix::from_vec(2, 2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![6.0, 5.0]).unwrap();
        let x = cholesky_solve(&a, &b).unwrap();
        // Solution of [[4,2],[2,3]] x = [6,5] is [1, 1].
        assert!((x.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((x.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_mapping_scores_one() {
        let c = gaussian_data(2000, 2, 21);
        let eps = gaussian_data(2000, 2, 22);
        let (r2_content, r2_noise) = block_identifiability_score(&c, &c, &eps).unwrap();
        assert!((r2_content - 1.0).abs() < 1e-6, "content r2 {r2_content}");
        assert!(r2_noise <= 0.1, "noise r2 {r2_noise}");
    }

    #[test]
    fn invertible_reparameterization_scores_high() {
        let c = gaussian_data(2000, 2, 23);
        let eps = gaussian_data(2000, 2, 24);
        let c_hat = c.map(f64::tanh);
        let (r2_content, _) = block_identifiability_score(&c_hat, &c, &eps).unwrap();
        assert!(r2_content >= 0.95, "content r2 {r2_content}");
    }

    #[test]
    fn independent_noise_scores_low() {
        let c = gaussian_data(2000, 2, 25);
        let eps = gaussian_data(2000, 2, 26);
        let c_hat = gaussian_data(2000, 2, 27);
        let (r2_content, _) = block_identifiability_score(&c_hat, &c, &eps).unwrap();
        assert!(r2_content <= 0.1, "content r2 {r2_content}");
    }

    #[test]
    fn small_or_degenerate_inputs_are_rejected() {
        let c = gaussian_data(400, 2, 28);
        let eps = gaussian_data(400, 2, 29);
        assert!(block_identifiability_score(&c, &c, &eps).is_err());

        let c = gaussian_data(600, 2, 30);
        let eps = gaussian_data(600, 2, 31);
        let constant = Matrix::filled(600, 2, 1.3);
        assert!(block_identifiability_score(&c, &constant, &eps).is_err());
    }
}
