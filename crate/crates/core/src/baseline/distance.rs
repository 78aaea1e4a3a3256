use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{same_size, PointCloud};
use crate::error::{Result, ShapeError};

fn check_inputs(clouds: &[PointCloud], labels: &[u8]) -> Result<()> {
    if clouds.len() != labels.len() {
        return Err(ShapeError::DimensionMismatch(format!(
            "{} clouds, {} labels",
            clouds.len(),
            labels.len()
        )));
    }
    if let Some(first) = clouds.first() {
        for c in &clouds[1..] {
            same_size(first, c)?;
        }
    }
    Ok(())
}

/// Mean total point-wise distance over unordered pairs `i < j` accepted by
/// `keep`.
fn pair_mean(
    clouds: &[PointCloud],
    labels: &[u8],
    keep: impl Fn(u8, u8) -> bool,
) -> Result<Option<f64>> {
    check_inputs(clouds, labels)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..clouds.len() {
        for j in i + 1..clouds.len() {
            if keep(labels[i], labels[j]) {
                sum += clouds[i].total_distance(&clouds[j])?;
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Average total point-wise distance between clouds with different labels.
pub fn inter_class_distance(clouds: &[PointCloud], labels: &[u8]) -> Result<f64> {
    pair_mean(clouds, labels, |a, b| a != b)?.ok_or(ShapeError::EmptyPairSet("inter-class"))
}

/// Average total point-wise distance between clouds with equal labels.
pub fn intra_class_distance(clouds: &[PointCloud], labels: &[u8]) -> Result<f64> {
    pair_mean(clouds, labels, |a, b| a == b)?.ok_or(ShapeError::EmptyPairSet("intra-class"))
}

/// `(d_inter, d_intra)`.
pub fn class_distances(clouds: &[PointCloud], labels: &[u8]) -> Result<(f64, f64)> {
    Ok((
        inter_class_distance(clouds, labels)?,
        intra_class_distance(clouds, labels)?,
    ))
}

/// Symmetric, nonnegative, zero-diagonal matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(DMatrix<f64>);

impl DistanceMatrix {
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        if !d.is_square() {
            return Err(ShapeError::DimensionMismatch(format!(
                "distance matrix is {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        let n = d.nrows();
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(ShapeError::OutOfRange(format!(
                    "diagonal entry {i} is {}",
                    d[(i, i)]
                )));
            }
            for j in 0..n {
                let v = d[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(ShapeError::OutOfRange(format!("entry ({i}, {j}) is {v}")));
                }
                if (v - d[(j, i)]).abs() > 1e-10 {
                    return Err(ShapeError::OutOfRange(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(Self(d))
    }

    /// Evaluate `dist(i, j)` for every pair `i < j` in parallel and mirror it.
    pub fn from_pairs<F>(n: usize, dist: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let values = pairs
            .par_iter()
            .map(|&(i, j)| dist(i, j))
            .collect::<Result<Vec<f64>>>()?;
        let mut d = DMatrix::zeros(n, n);
        for (&(i, j), v) in pairs.iter().zip(values) {
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
        Self::new(d)
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Header row `1..n`, then one row per subject.
    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let n = self.len();
        let mut out = (1..=n).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:?}", self.0[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| ShapeError::io(path, e))
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ShapeError::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n = lines.next().map_or(0, |h| h.split(',').count());
        let mut d = DMatrix::zeros(n, n);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let vals: Vec<&str> = line.split(',').collect();
            if i >= n || vals.len() != n {
                return Err(ShapeError::parse(
                    path,
                    format!("row {} does not fit a {n}x{n} matrix", i + 1),
                ));
            }
            for (j, v) in vals.iter().enumerate() {
                d[(i, j)] = v.trim().parse().map_err(|e| {
                    ShapeError::parse(path, format!("row {}, column {}: {e}", i + 1, j + 1))
                })?;
            }
            rows += 1;
        }
        if rows != n {
            return Err(ShapeError::parse(
                path,
                format!("{rows} rows for {n} columns"),
            ));
        }
        Self::new(d).map_err(|e| ShapeError::parse(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn point(x: f64) -> PointCloud {
        PointCloud::new(vec![Vector3::new(x, 0.0, 0.0)]).unwrap()
    }

    #[test]
    fn hand_enumerated_pairs() {
        let clouds = [point(0.0), point(1.0), point(3.0)];
        let (inter, intra) = class_distances(&clouds, &[0, 0, 1]).unwrap();
        assert_eq!(intra, 1.0);
        assert_eq!(inter, 2.5);
        assert_eq!(
            class_distances(&clouds, &[1, 1, 0]).unwrap(),
            (inter, intra)
        );
    }

    #[test]
    fn missing_pair_classes() {
        let clouds = [point(2.0), point(2.0)];
        assert_eq!(inter_class_distance(&clouds, &[0, 1]).unwrap(), 0.0);
        assert!(matches!(
            intra_class_distance(&clouds, &[0, 1]),
            Err(ShapeError::EmptyPairSet(_))
        ));
        assert!(inter_class_distance(&clouds, &[1, 1]).is_err());
    }

    #[test]
    fn matrix_validation_and_csv() {
        let d =
            DistanceMatrix::from_pairs(4, |i, j| Ok((i as f64 - j as f64).abs() / 3.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        d.to_csv(&path).unwrap();
        assert_eq!(DistanceMatrix::from_csv(&path).unwrap(), d);
        let mut bad = d.matrix().clone();
        bad[(0, 1)] = 5.0;
        assert!(DistanceMatrix::new(bad).is_err());
    }
}
