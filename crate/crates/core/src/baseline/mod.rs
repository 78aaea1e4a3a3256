//! Vertex-wise comparison pipeline: rigid ICP alignment of point clouds,
//! PCA on flattened coordinates, class distance summaries and classical MDS.

mod distance;
mod icp;
mod mds;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Result, ShapeError};
use crate::grid::Surface;
use crate::statistics::PcaBasis;

pub use distance::{class_distances, inter_class_distance, intra_class_distance, DistanceMatrix};
pub use icp::{align_to_reference, icp_register, IcpOptions, IcpResult, RigidTransform};
pub use mds::{classical_mds, nearest_neighbor_accuracy, MdsResult};

/// Points with a fixed index order shared across a cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(ShapeError::TooFewInputs { needed: 1, got: 0 });
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(ShapeError::NonFinite(i));
        }
        Ok(Self { points })
    }

    pub fn from_surface(f: &Surface) -> Self {
        Self {
            points: f.points().to_vec(),
        }
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }

    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| rotation * p + translation)
                .collect(),
        }
    }

    /// Coordinates as `x0, y0, z0, x1, ...`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    /// Sum over points of the Euclidean distance between corresponding points.
    pub fn total_distance(&self, other: &PointCloud) -> Result<f64> {
        same_size(self, other)?;
        Ok(self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a - b).norm())
            .sum())
    }
}

fn same_size(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.len() != b.len() {
        return Err(ShapeError::DimensionMismatch(format!(
            "point clouds with {} and {} points",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// PCA of aligned clouds about their mean, with the same conventions as the
/// surface pipeline.
pub fn vertex_pca(aligned: &[PointCloud]) -> Result<PcaBasis> {
    if aligned.len() < 2 {
        return Err(ShapeError::TooFewInputs {
            needed: 2,
            got: aligned.len(),
        });
    }
    for c in &aligned[1..] {
        same_size(&aligned[0], c)?;
    }
    let samples: Vec<Vec<f64>> = aligned.iter().map(PointCloud::to_flat).collect();
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for s in &samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= samples.len() as f64);
    PcaBasis::fit(&samples, &mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::VarianceConvention;

    fn cloud(offsets: &[f64]) -> PointCloud {
        PointCloud::new(
            offsets
                .iter()
                .enumerate()
                .map(|(i, o)| Vector3::new(i as f64, (i * i) as f64 * 0.1, *o))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_clouds() {
        assert!(PointCloud::new(vec![]).is_err());
        assert!(PointCloud::new(vec![Vector3::new(0.0, f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn identical_clouds_have_no_variance() {
        let c = cloud(&[0.0, 1.0, 0.5, 2.0]);
        let basis = vertex_pca(&[c.clone(), c.clone(), c]).unwrap();
        assert!(basis.singulars().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn rank_one_family() {
        let clouds: Vec<PointCloud> = (0..6)
            .map(|i| {
                let t = i as f64 - 2.5;
                cloud(&[t, -t, 2.0 * t, 0.5 * t, 0.0])
            })
            .collect();
        let basis = vertex_pca(&clouds).unwrap();
        let cum = basis.cumulative_variance(VarianceConvention::Singular);
        assert!(cum[0] > 0.999_999);
        let d = basis.directions();
        let gram = d.transpose() * d;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - e).abs() < 1e-8);
            }
        }
        assert!(vertex_pca(&clouds[..1]).is_err());
    }
}
