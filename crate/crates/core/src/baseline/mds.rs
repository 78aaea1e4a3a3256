use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use super::DistanceMatrix;
use crate::error::{Result, ShapeError};

#[derive(Debug, Clone)]
pub struct MdsResult {
    /// `n x k`, one row per subject.
    pub coords: DMatrix<f64>,
    /// Eigenvalues of the double-centered matrix, descending, before clamping.
    pub eigenvalues: Vec<f64>,
    /// Some of the top `k` eigenvalues were not positive; those columns are zero.
    pub truncated: bool,
}

impl MdsResult {
    /// Columns `index, label, x1..xk`.
    pub fn to_csv(&self, labels: &[u8], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let k = self.coords.ncols();
        let mut out = String::from("index,label");
        for c in 1..=k {
            out.push_str(&format!(",x{c}"));
        }
        out.push('\n');
        for r in 0..self.coords.nrows() {
            let label = labels.get(r).map_or(String::new(), |l| l.to_string());
            out.push_str(&format!("{},{label}", r + 1));
            for c in 0..k {
                out.push_str(&format!(",{:?}", self.coords[(r, c)]));
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| ShapeError::io(path, e))
    }
}

/// Classical (Torgerson) MDS into `k` dimensions.
pub fn classical_mds(d: &DistanceMatrix, k: usize) -> Result<MdsResult> {
    if k == 0 {
        return Err(ShapeError::OutOfRange("MDS needs k >= 1".into()));
    }
    let n = d.len();
    let sq = d.matrix().map(|v| v * v);
    let j = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n.max(1) as f64);
    let b = -0.5 * &j * sq * &j;
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    // eigenvalues at rounding level count as zero
    let scale = eigenvalues
        .first()
        .map_or(0.0, |v| v.abs())
        .max(f64::MIN_POSITIVE);
    let tiny = scale * n as f64 * f64::EPSILON * 16.0;
    let mut coords = DMatrix::zeros(n, k);
    let mut truncated = false;
    for c in 0..k {
        match order.get(c) {
            Some(&i) if eig.eigenvalues[i] > tiny => {
                let s = eig.eigenvalues[i].sqrt();
                let v = eig.eigenvectors.column(i);
                // deterministic sign: largest-magnitude entry positive
                let sign = if v[v.iamax()] < 0.0 { -1.0 } else { 1.0 };
                for r in 0..n {
                    coords[(r, c)] = sign * s * v[r];
                }
            }
            _ => truncated = true,
        }
    }
    if truncated && n > 1 && eigenvalues.iter().any(|&v| v > tiny) {
        log::warn!("MDS: fewer than {k} positive eigenvalues; extra columns are zero");
    }
    Ok(MdsResult {
        coords,
        eigenvalues,
        truncated,
    })
}

/// Leave-one-out 1-NN accuracy under a distance matrix; ties go to the lowest
/// index.
pub fn nearest_neighbor_accuracy(d: &DistanceMatrix, labels: &[u8]) -> Result<f64> {
    let n = d.len();
    if labels.len() != n || n < 2 {
        return Err(ShapeError::DimensionMismatch(format!(
            "{} labels for {n} subjects",
            labels.len()
        )));
    }
    let hits = (0..n)
        .filter(|&i| {
            let j = (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)))
                .expect("n >= 2");
            labels[i] == labels[j]
        })
        .count();
    Ok(hits as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    fn from_points(p: &[Vector2<f64>]) -> DistanceMatrix {
        DistanceMatrix::from_pairs(p.len(), |i, j| Ok((p[i] - p[j]).norm())).unwrap()
    }

    #[test]
    fn planar_points_reproduce_distances() {
        let p = [
            Vector2::new(0.0, 0.0),
            Vector2::new(2.0, 0.5),
            Vector2::new(-1.0, 3.0),
            Vector2::new(0.7, -1.2),
        ];
        let d = from_points(&p);
        let m = classical_mds(&d, 2).unwrap();
        assert!(!m.truncated);
        for i in 0..4 {
            for j in 0..4 {
                let e = (m.coords.row(i) - m.coords.row(j)).norm();
                assert!((e - d.get(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_matrix() {
        let d = DistanceMatrix::new(DMatrix::zeros(5, 5)).unwrap();
        let m = classical_mds(&d, 2).unwrap();
        assert!(m.coords.iter().all(|v| *v == 0.0));
        assert!(m.truncated);
        assert!(classical_mds(&d, 0).is_err());
    }

    #[test]
    fn separated_clusters() {
        let p: Vec<Vector2<f64>> = (0..20)
            .map(|i| {
                let off = if i < 10 { 0.0 } else { 10.0 };
                Vector2::new(off + (i % 3) as f64 * 0.3, (i % 4) as f64 * 0.2)
            })
            .collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let m = classical_mds(&from_points(&p), 2).unwrap();
        let emb =
            DistanceMatrix::from_pairs(20, |i, j| Ok((m.coords.row(i) - m.coords.row(j)).norm()))
                .unwrap();
        assert_eq!(nearest_neighbor_accuracy(&emb, &labels).unwrap(), 1.0);
    }
}
