//! Synthetic multi-mode datasets and feature-matrix file IO.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Point cloud with mode labels and the generating mode geometry.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub points: Matrix,
    pub labels: Vec<usize>,
    pub mode_centers: Matrix,
    pub mode_sigma: f64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn n_modes(&self) -> usize {
        self.mode_centers.rows()
    }
}

/// `k_modes` Gaussian blobs equally spaced on a circle. Mode `j` sits at
/// angle `2 pi j / k`.
pub fn make_ring(
    k_modes: usize,
    radius: f64,
    sigma: f64,
    n_per_mode: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if k_modes == 0 || n_per_mode == 0 {
        return Err(Error::InvalidArgument(format!(
            "make_ring: k_modes and n_per_mode must be positive, got {k_modes}, {n_per_mode}"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "make_ring: sigma must be positive, got {sigma}"
        )));
    }
    let mut centers = Matrix::zeros(k_modes, 2);
    for j in 0..k_modes {
        let angle = std::f64::consts::TAU * j as f64 / k_modes as f64;
        centers.set(j, 0, radius * angle.cos());
        centers.set(j, 1, radius * angle.sin());
    }
    sample_around_centers(centers, sigma, n_per_mode, seed)
}

/// `side x side` lattice of Gaussian blobs with the given spacing, centered
/// at the origin.
pub fn make_grid(
    side: usize,
    spacing: f64,
    sigma: f64,
    n_per_mode: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if side == 0 || n_per_mode == 0 {
        return Err(Error::InvalidArgument(format!(
            "make_grid: side and n_per_mode must be positive, got {side}, {n_per_mode}"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "make_grid: sigma must be positive, got {sigma}"
        )));
    }
    let k = side * side;
    let offset = (side as f64 - 1.0) / 2.0;
    let mut centers = Matrix::zeros(k, 2);
    for r in 0..side {
        for c in 0..side {
            centers.set(r * side + c, 0, (c as f64 - offset) * spacing);
            centers.set(r * side + c, 1, (r as f64 - offset) * spacing);
        }
    }
    sample_around_centers(centers, sigma, n_per_mode, seed)
}

fn sample_around_centers(
    centers: Matrix,
    sigma: f64,
    n_per_mode: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let k = centers.rows();
    let mut rng = Rng::new(seed);
    let noise = rng.sample_normal(k * n_per_mode, 2)?;
    let mut points = Matrix::zeros(k * n_per_mode, 2);
    let mut labels = Vec::with_capacity(k * n_per_mode);
    for j in 0..k {
        for i in 0..n_per_mode {
            let row = j * n_per_mode + i;
            points.set(row, 0, centers.get(j, 0) + sigma * noise.get(row, 0));
            points.set(row, 1, centers.get(j, 1) + sigma * noise.get(row, 1));
            labels.push(j);
        }
    }
    Ok(LabeledDataset {
        points,
        labels,
        mode_centers: centers,
        mode_sigma: sigma,
    })
}

/// Uniformly sampled class subset and per-class sample subset.
pub fn subset(
    dataset: &LabeledDataset,
    n_classes: usize,
    n_per_class: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let k = dataset.n_modes();
    if n_classes == 0 || n_classes > k {
        return Err(Error::InvalidArgument(format!(
            "subset: n_classes must be in 1..={k}, got {n_classes}"
        )));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in dataset.labels.iter().enumerate() {
        per_class[l].push(i);
    }
    let min_count = per_class.iter().map(Vec::len).min().unwrap_or(0);
    if n_per_class == 0 || n_per_class > min_count {
        return Err(Error::InvalidArgument(format!(
            "subset: n_per_class must be in 1..={min_count}, got {n_per_class}"
        )));
    }

    let mut rng = Rng::new(seed);
    let chosen_classes = sample_without_replacement(&mut rng, k, n_classes);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for (new_label, &class) in chosen_classes.iter().enumerate() {
        centers.push(dataset.mode_centers.row(class).to_vec());
        let members = &per_class[class];
        let picks = sample_without_replacement(&mut rng, members.len(), n_per_class);
        for &p in &picks {
            rows.push(dataset.points.row(members[p]).to_vec());
            labels.push(new_label);
        }
    }
    Ok(LabeledDataset {
        points: Matrix::from_rows(&rows)?,
        labels,
        mode_centers: Matrix::from_rows(&centers)?,
        mode_sigma: dataset.mode_sigma,
    })
}

/// `count` distinct indices from `0..n`, in draw order (partial
/// Fisher-Yates).
fn sample_without_replacement(rng: &mut Rng, n: usize, count: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let j = i + rng.next_index(n - i);
        pool.swap(i, j);
        out.push(pool[i]);
    }
    out
}

/// Format one value with 17 significant digits, enough for an exact f64
/// round trip through decimal.
fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a matrix as CSV with header `f0,...,f{d-1}`. Values round-trip
/// bitwise through [`load_features`].
pub fn save_features(path: &Path, matrix: &Matrix) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let header: Vec<String> = (0..matrix.cols()).map(|c| format!("f{c}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for r in 0..matrix.rows() {
        let row: Vec<String> = matrix.row(r).iter().map(|&v| format_value(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a feature CSV written by [`save_features`] (or any numeric CSV with
/// a header row). Errors carry the 1-based line number.
pub fn load_features(path: &Path) -> Result<Matrix> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".to_string(),
    })?;
    let width = header.split(',').count();
    if header.trim().is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "empty header".to_string(),
        });
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(width);
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|e| Error::Parse {
                line: idx + 1,
                msg: format!("bad number {f:?}: {e}"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".to_string(),
        });
    }
    Matrix::from_rows(&rows)
}

/// Write a dataset as CSV: feature columns plus a trailing `label` column.
pub fn save_dataset(path: &Path, dataset: &LabeledDataset) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let mut header: Vec<String> = (0..dataset.points.cols()).map(|c| format!("f{c}")).collect();
    header.push("label".to_string());
    writeln!(w, "{}", header.join(","))?;
    for r in 0..dataset.points.rows() {
        let mut row: Vec<String> = dataset.points.row(r).iter().map(|&v| format_value(v)).collect();
        row.push(dataset.labels[r].to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn ring_construction() {
        let ds = make_ring(8, 2.0, 0.02, 100, 1).unwrap();
        assert_eq!(ds.len(), 800);
        assert_eq!(ds.n_modes(), 8);
        let mut distinct: Vec<usize> = ds.labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 8);
        for j in 0..8 {
            let angle = std::f64::consts::TAU * j as f64 / 8.0;
            assert!((ds.mode_centers.get(j, 0) - 2.0 * angle.cos()).abs() < 1e-12);
            assert!((ds.mode_centers.get(j, 1) - 2.0 * angle.sin()).abs() < 1e-12);
            let norm = ds.mode_centers.row(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_to_center_distance_concentrates() {
        let ds = make_ring(8, 2.0, 0.02, 200, 3).unwrap();
        let mut dists: Vec<f64> = (0..ds.len())
            .map(|i| {
                Matrix::row_sqdist(&ds.points, i, &ds.mode_centers, ds.labels[i]).sqrt()
            })
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = dists[dists.len() / 2];
        assert!(median < 3.0 * 0.02, "median {median}");
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = make_ring(5, 1.0, 0.1, 20, 9).unwrap();
        let b = make_ring(5, 1.0, 0.1, 20, 9).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.labels, b.labels);
        let g = make_grid(3, 2.0, 0.05, 10, 4).unwrap();
        let h = make_grid(3, 2.0, 0.05, 10, 4).unwrap();
        assert_eq!(g.points, h.points);
    }

    #[test]
    fn grid_layout() {
        let ds = make_grid(2, 2.0, 0.05, 1, 1).unwrap();
        assert_eq!(ds.n_modes(), 4);
        // Centers at (+-1, +-1).
        for j in 0..4 {
            assert!((ds.mode_centers.get(j, 0).abs() - 1.0).abs() < 1e-12);
            assert!((ds.mode_centers.get(j, 1).abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn subset_identity_and_counts() {
        let ds = make_ring(8, 2.0, 0.1, 60, 7).unwrap();
        let full = subset(&ds, 8, 60, 11).unwrap();
        assert_eq!(full.len(), ds.len());

        let half = subset(&ds, 4, 60, 11).unwrap();
        let mut labels = half.labels.clone();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 4);

        let trimmed = subset(&ds, 8, 50, 11).unwrap();
        for class in 0..8 {
            let count = trimmed.labels.iter().filter(|&&l| l == class).count();
            assert_eq!(count, 50);
        }
    }

    #[test]
    fn subset_idempotent_for_fixed_seed() {
        let ds = make_ring(6, 2.0, 0.1, 30, 2).unwrap();
        let a = subset(&ds, 3, 10, 5).unwrap();
        let b = subset(&ds, 3, 10, 5).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn subset_over_request_is_an_error() {
        let ds = make_ring(4, 1.0, 0.1, 10, 2).unwrap();
        assert!(subset(&ds, 5, 10, 1).is_err());
        assert!(subset(&ds, 4, 11, 1).is_err());
    }

    #[test]
    fn feature_round_trip_is_bitwise_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let m = Rng::new(13).sample_normal(10, 4).unwrap();
        save_features(&path, &m).unwrap();
        let loaded = load_features(&path).unwrap();
        assert_eq!(m.rows(), loaded.rows());
        for (a, b) in m.as_slice().iter().zip(loaded.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn load_errors() {
        let dir = tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        fs::write(&empty, "").unwrap();
        assert!(load_features(&empty).is_err());

        let ragged = dir.path().join("ragged.csv");
        fs::write(&ragged, "f0,f1\n1.0,2.0\n3.0\n").unwrap();
        let err = load_features(&ragged).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");

        let junk = dir.path().join("junk.csv");
        fs::write(&junk, "f0\nhello\n").unwrap();
        let err = load_features(&junk).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
