use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};

/// Principal directions of a set of flattened shape vectors.
///
/// Directions are the left singular vectors of the data matrix whose columns
/// are `x_i - mean`; singular values are those of the same matrix (so the
/// covariance `C = sum V_i V_i^T` has eigenvalues `singulars²`).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    mean: DVector<f64>,
    directions: DMatrix<f64>,
    singulars: Vec<f64>,
    n_train: usize,
}

/// How cumulative fractions weigh each component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceConvention {
    /// Proportion of the total of singular values.
    #[default]
    Singular,
    /// Proportion of the total of squared singular values (eigenvalues of C).
    Squared,
}

impl PcaBasis {
    /// Decompose `samples` about `mean`. All vectors must share a length.
    pub fn fit(samples: &[Vec<f64>], mean: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(ShapeError::TooFewInputs {
                needed: 2,
                got: samples.len(),
            });
        }
        let dim = mean.len();
        if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
            return Err(ShapeError::DimensionMismatch(format!(
                "sample of length {} vs mean of length {dim}",
                bad.len()
            )));
        }
        let n = samples.len();
        let data = DMatrix::from_fn(dim, n, |r, c| samples[c][r] - mean[r]);
        let svd = data.svd(true, false);
        let u = svd
            .u
            .ok_or_else(|| ShapeError::Numerical("SVD did not return U".into()))?;

        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut directions = DMatrix::zeros(dim, order.len());
        let mut singulars = Vec::with_capacity(order.len());
        for (col, &k) in order.iter().enumerate() {
            let mut v = u.column(k).into_owned();
            // deterministic sign: largest-magnitude entry positive
            let pivot = v.iamax();
            if v[pivot] < 0.0 {
                v.neg_mut();
            }
            directions.set_column(col, &v);
            singulars.push(svd.singular_values[k].max(0.0));
        }
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            directions,
            singulars,
            n_train: n,
        })
    }

    pub fn from_parts(
        mean: DVector<f64>,
        directions: DMatrix<f64>,
        singulars: Vec<f64>,
        n_train: usize,
    ) -> Result<Self> {
        if directions.nrows() != mean.len() || directions.ncols() != singulars.len() {
            return Err(ShapeError::DimensionMismatch(format!(
                "directions {}x{} vs mean {} and {} singular values",
                directions.nrows(),
                directions.ncols(),
                mean.len(),
                singulars.len()
            )));
        }
        Ok(Self {
            mean,
            directions,
            singulars,
            n_train,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn singulars(&self) -> &[f64] {
        &self.singulars
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_directions(&self) -> usize {
        self.directions.ncols()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_count(&self, d: usize) -> Result<()> {
        if d > self.n_directions() {
            return Err(ShapeError::OutOfRange(format!(
                "requested {d} components, model stores {}",
                self.n_directions()
            )));
        }
        Ok(())
    }

    /// First `d` principal scores `<x - mean, U(:, k)>`.
    pub fn scores(&self, x: &[f64], d: usize) -> Result<Vec<f64>> {
        self.check_count(d)?;
        if x.len() != self.dim() {
            return Err(ShapeError::DimensionMismatch(format!(
                "vector of length {} for model of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let dev = DVector::from_column_slice(x) - &self.mean;
        Ok((0..d)
            .map(|k| self.directions.column(k).dot(&dev))
            .collect())
    }

    /// `mean + sum_k z_k U(:, k)`.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_count(z.len())?;
        let mut out = self.mean.clone();
        for (k, &zk) in z.iter().enumerate() {
            out.axpy(zk, &self.directions.column(k), 1.0);
        }
        Ok(out.as_slice().to_vec())
    }

    pub fn cumulative_variance(&self, convention: VarianceConvention) -> Vec<f64> {
        let weights: Vec<f64> = match convention {
            VarianceConvention::Singular => self.singulars.clone(),
            VarianceConvention::Squared => self.singulars.iter().map(|s| s * s).collect(),
        };
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        weights
            .iter()
            .map(|w| {
                acc += w;
                if total > 0.0 {
                    (acc / total).min(1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Points `mean + t * sigma_k * U(:, k)` along component `k` (0-based).
    pub fn path(&self, k: usize, t_values: &[f64]) -> Result<Vec<Vec<f64>>> {
        if k >= self.n_directions() {
            return Err(ShapeError::OutOfRange(format!(
                "component {k} out of range (model stores {})",
                self.n_directions()
            )));
        }
        let dir = self.directions.column(k);
        let sigma = self.singulars[k];
        Ok(t_values
            .iter()
            .map(|&t| {
                let mut v = self.mean.clone();
                v.axpy(t * sigma, &dir, 1.0);
                v.as_slice().to_vec()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_of(samples: &[Vec<f64>]) -> Vec<f64> {
        let n = samples.len() as f64;
        (0..samples[0].len())
            .map(|r| samples.iter().map(|s| s[r]).sum::<f64>() / n)
            .collect()
    }

    #[test]
    fn rank_one_data() {
        let v: Vec<f64> = vec![1.0, 2.0, -2.0, 0.5, 0.0, 1.0];
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let base = vec![0.3; 6];
        let samples: Vec<Vec<f64>> = [-1.0, -0.4, 0.2, 0.7, 1.3]
            .iter()
            .map(|x| base.iter().zip(&v).map(|(b, vi)| b + x * vi).collect())
            .collect();
        let pca = PcaBasis::fit(&samples, &mean_of(&samples)).unwrap();
        let first = pca.directions().column(0);
        let dot: f64 = first.iter().zip(&v).map(|(a, b)| a * b / vn).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-10);
        assert!(pca.singulars()[1] < 1e-10);
        assert!(pca.cumulative_variance(VarianceConvention::Singular)[0] > 0.999);
    }

    #[test]
    fn variance_fractions() {
        let pca = PcaBasis::from_parts(
            DVector::zeros(3),
            DMatrix::identity(3, 3),
            vec![3.0, 2.0, 1.0],
            4,
        )
        .unwrap();
        let f = pca.cumulative_variance(VarianceConvention::Singular);
        assert!((f[0] - 0.5).abs() < 1e-15);
        assert!((f[1] - 5.0 / 6.0).abs() < 1e-15);
        assert!((f[2] - 1.0).abs() < 1e-15);
        let sq = pca.cumulative_variance(VarianceConvention::Squared);
        assert!((sq[0] - 9.0 / 14.0).abs() < 1e-15);

        let eq = PcaBasis::from_parts(DVector::zeros(4), DMatrix::identity(4, 4), vec![2.0; 4], 5)
            .unwrap()
            .cumulative_variance(VarianceConvention::Singular);
        for (d, f) in eq.iter().enumerate() {
            assert!((f - (d + 1) as f64 / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            PcaBasis::fit(&[vec![1.0]], &[1.0]),
            Err(ShapeError::TooFewInputs { .. })
        ));
    }

    #[test]
    fn out_of_range_requests() {
        let s = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
        let pca = PcaBasis::fit(&s, &mean_of(&s)).unwrap();
        assert!(pca.scores(&[0.0, 0.0], 3).is_err());
        assert!(pca.path(2, &[0.0]).is_err());
        assert!(pca.reconstruct(&[0.0; 3]).is_err());
    }
}
