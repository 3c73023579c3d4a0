//! Lloyd's algorithm with k-means++ seeding.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub centers: Matrix,
    pub assignments: Vec<usize>,
    pub distortion: f64,
    pub iterations: usize,
}

/// Lloyd iterations from k-means++ seeding. Terminates on an assignment
/// fixpoint or after `max_iters`. An emptied cluster is reseeded to the
/// point farthest from its assigned center.
pub fn kmeans(features: &Matrix, k: usize, max_iters: usize, seed: u64) -> Result<KmeansResult> {
    let n = features.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "kmeans: k must be in 1..={n}, got {k}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut centers = plus_plus_init(features, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut iterations = 0;
    let mut prev_distortion = f64::INFINITY;

    for iter in 0..max_iters.max(1) {
        iterations = iter + 1;

        // Assignment step.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = Matrix::row_sqdist(features, i, &centers, c);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }

        // Update step.
        let mut counts = vec![0usize; k];
        let mut sums = Matrix::zeros(k, features.cols());
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(features.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed to the point farthest from its center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = Matrix::row_sqdist(features, a, &centers, assignments[a]);
                        let db = Matrix::row_sqdist(features, b, &centers, assignments[b]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers.row_mut(c).copy_from_slice(features.row(far));
                changed = true;
            } else {
                let inv = 1.0 / counts[c] as f64;
                for (dst, &s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }

        let distortion = total_distortion(features, &centers, &assignments);
        debug_assert!(
            distortion <= prev_distortion + 1e-9,
            "distortion increased: {prev_distortion} -> {distortion}"
        );
        prev_distortion = distortion;

        if !changed {
            break;
        }
    }

    // Final assignment against the last centers.
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = Matrix::row_sqdist(features, i, &centers, c);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignments[i] = best;
    }
    let distortion = total_distortion(features, &centers, &assignments);

    Ok(KmeansResult {
        centers,
        assignments,
        distortion,
        iterations,
    })
}

fn total_distortion(features: &Matrix, centers: &Matrix, assignments: &[usize]) -> f64 {
    (0..features.rows())
        .map(|i| Matrix::row_sqdist(features, i, centers, assignments[i]))
        .sum()
}

/// k-means++: first center uniform, later centers sampled proportionally to
/// the squared distance from the nearest chosen center. If every remaining
/// distance is zero (duplicate points), the first unchosen point is taken.
fn plus_plus_init(features: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = features.rows();
    let mut chosen: Vec<usize> = vec![rng.next_index(n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| Matrix::row_sqdist(features, i, features, chosen[0]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.next_f64() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for i in 0..n {
            let d = Matrix::row_sqdist(features, i, features, next);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    let mut centers = Matrix::zeros(k, features.cols());
    for (c, &i) in chosen.iter().enumerate() {
        centers.row_mut(c).copy_from_slice(features.row(i));
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_equals_n_gives_zero_distortion() {
        let pts = Rng::new(2).sample_normal(6, 3).unwrap();
        let res = kmeans(&pts, 6, 50, 1).unwrap();
        assert!(res.distortion < 1e-24, "distortion {}", res.distortion);
        let mut seen = res.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn two_separated_blobs_are_recovered() {
        let mut rng = Rng::new(3);
        let noise = rng.sample_normal(200, 2).unwrap();
        let mut rows = Vec::new();
        for i in 0..200 {
            let (cx, cy) = if i < 100 { (0.0, 0.0) } else { (10.0, 10.0) };
            rows.push(vec![cx + 0.1 * noise.get(i, 0), cy + 0.1 * noise.get(i, 1)]);
        }
        let pts = Matrix::from_rows(&rows).unwrap();
        let res = kmeans(&pts, 2, 100, 7).unwrap();
        let mut centers: Vec<Vec<f64>> = (0..2).map(|c| res.centers.row(c).to_vec()).collect();
        centers.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!((centers[0][0]).abs() < 0.1 && (centers[0][1]).abs() < 0.1, "{centers:?}");
        assert!((centers[1][0] - 10.0).abs() < 0.1 && (centers[1][1] - 10.0).abs() < 0.1);
    }

    #[test]
    fn same_seed_same_output() {
        let pts = Rng::new(5).sample_normal(40, 2).unwrap();
        let a = kmeans(&pts, 4, 50, 9).unwrap();
        let b = kmeans(&pts, 4, 50, 9).unwrap();
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn k_larger_than_n_is_an_error() {
        let pts = Matrix::zeros(3, 2);
        assert!(kmeans(&pts, 4, 10, 1).is_err());
        assert!(kmeans(&pts, 0, 10, 1).is_err());
    }
}
