//! Shape statistics on registered surfaces: geodesic interpolation, the
//! Karcher mean, PCA, principal scores and reconstruction.

mod karcher;
mod model_io;
mod pca;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ShapeError};
use crate::grid::{SphericalGrid, Surface};

pub use karcher::{karcher_mean, InitialMean, KarcherOptions, KarcherResult};
pub use model_io::{load_model, save_model};
pub use pca::{PcaBasis, VarianceConvention};

/// Linear path `(1 - tau) f1 + tau f2*` between a surface and its registered
/// counterpart.
pub fn geodesic(f1: &Surface, f2_star: &Surface, tau: f64) -> Result<Surface> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(ShapeError::OutOfRange(format!(
            "tau = {tau} outside [0, 1]"
        )));
    }
    same_grid(f1, f2_star)?;
    if tau == 0.0 {
        return Ok(f1.clone());
    }
    if tau == 1.0 {
        return Ok(f2_star.clone());
    }
    let pts = f1
        .points()
        .iter()
        .zip(f2_star.points())
        .map(|(a, b)| a * (1.0 - tau) + b * tau)
        .collect();
    Surface::new(*f1.grid(), pts)
}

fn same_grid(a: &Surface, b: &Surface) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(ShapeError::DimensionMismatch(format!(
            "surfaces on {}x{} and {}x{} grids",
            a.grid().n_u(),
            a.grid().n_v(),
            b.grid().n_u(),
            b.grid().n_v()
        )));
    }
    Ok(())
}

/// Pointwise arithmetic mean of surfaces on a common grid.
pub fn mean_surface(surfaces: &[Surface]) -> Result<Surface> {
    let first = surfaces
        .first()
        .ok_or(ShapeError::TooFewInputs { needed: 1, got: 0 })?;
    let n = surfaces.len() as f64;
    let mut acc = vec![nalgebra::Vector3::zeros(); first.grid().len()];
    for s in surfaces {
        same_grid(first, s)?;
        for (a, p) in acc.iter_mut().zip(s.points()) {
            *a += p;
        }
    }
    Surface::new(*first.grid(), acc.into_iter().map(|a| a / n).collect())
}

/// Principal component model of registered surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeModel {
    grid: SphericalGrid,
    basis: PcaBasis,
}

/// Principal scores of one surface.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct PcScores(pub Vec<f64>);

impl PcScores {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl ShapeModel {
    pub fn from_basis(grid: SphericalGrid, basis: PcaBasis) -> Result<Self> {
        if basis.dim() != 3 * grid.len() {
            return Err(ShapeError::DimensionMismatch(format!(
                "basis dimension {} does not match grid with {} nodes",
                basis.dim(),
                grid.len()
            )));
        }
        Ok(Self { grid, basis })
    }

    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    pub fn basis(&self) -> &PcaBasis {
        &self.basis
    }

    pub fn mean(&self) -> Surface {
        Surface::from_flat(self.grid, self.basis.mean().as_slice())
            .expect("model mean matches its grid")
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        self.basis.directions()
    }

    pub fn singulars(&self) -> &[f64] {
        self.basis.singulars()
    }

    pub fn n_train(&self) -> usize {
        self.basis.n_train()
    }

    pub fn n_directions(&self) -> usize {
        self.basis.n_directions()
    }

    /// Direction `k` (0-based) reshaped as a per-node displacement field.
    pub fn direction_surface(&self, k: usize) -> Result<Surface> {
        if k >= self.n_directions() {
            return Err(ShapeError::OutOfRange(format!("direction {k}")));
        }
        let col: DVector<f64> = self.directions().column(k).into_owned();
        Surface::from_flat(self.grid, col.as_slice())
    }
}

/// PCA of registered surfaces about `mean` using the flattened Euclidean
/// inner product.
pub fn shape_pca(registered: &[Surface], mean: &Surface) -> Result<ShapeModel> {
    for s in registered {
        same_grid(mean, s)?;
    }
    let samples: Vec<Vec<f64>> = registered.iter().map(Surface::to_flat).collect();
    let basis = PcaBasis::fit(&samples, &mean.to_flat())?;
    ShapeModel::from_basis(*mean.grid(), basis)
}

/// First `d` principal scores of `f`.
pub fn pc_scores(f: &Surface, model: &ShapeModel, d: usize) -> Result<PcScores> {
    if *f.grid() != model.grid {
        return Err(ShapeError::DimensionMismatch(
            "surface and model grids differ".into(),
        ));
    }
    model.basis.scores(&f.to_flat(), d).map(PcScores)
}

/// `mean + sum_d z_d U(:, d)`.
pub fn reconstruct(z: &PcScores, model: &ShapeModel) -> Result<Surface> {
    let flat = model.basis.reconstruct(&z.0)?;
    Surface::from_flat(model.grid, &flat)
}

/// Running share of the total singular values captured by the leading
/// directions.
pub fn cumulative_variance(model: &ShapeModel, convention: VarianceConvention) -> Vec<f64> {
    model.basis.cumulative_variance(convention)
}

/// Surfaces `mean + t sigma_k U(:, k)` for each `t`; `k` is 0-based.
pub fn pc_path(model: &ShapeModel, k: usize, t_values: &[f64]) -> Result<Vec<Surface>> {
    model
        .basis
        .path(k, t_values)?
        .iter()
        .map(|flat| Surface::from_flat(model.grid, flat))
        .collect()
}

/// Per-node Euclidean difference `|f_hat(s) - f(s)|`.
pub fn diff_field(f_hat: &Surface, f: &Surface) -> Result<Vec<f64>> {
    same_grid(f_hat, f)?;
    Ok(f_hat
        .points()
        .iter()
        .zip(f.points())
        .map(|(a, b)| (a - b).norm())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use nalgebra::Vector3;

    fn blob(g: SphericalGrid, a: f64, b: f64) -> Surface {
        Surface::from_fn(g, |t, p| {
            let s = SphericalGrid::embed(t, p);
            Vector3::new(
                s.x * (1.0 + a * s.z),
                0.7 * s.y,
                0.5 * s.z * (1.0 + b * s.x),
            )
        })
        .unwrap()
    }

    fn cohort(g: SphericalGrid) -> Vec<Surface> {
        (0..6)
            .map(|i| {
                let x = i as f64 / 5.0;
                blob(g, 0.3 * x - 0.1, 0.2 * (x * 7.0).sin())
            })
            .collect()
    }

    #[test]
    fn geodesic_endpoints_and_midpoint() {
        let g = make_grid(12, 10).unwrap();
        let (a, b) = (blob(g, 0.1, 0.0), blob(g, -0.2, 0.3));
        assert_eq!(geodesic(&a, &b, 0.0).unwrap(), a);
        assert_eq!(geodesic(&a, &b, 1.0).unwrap(), b);
        let mid = geodesic(&a, &b, 0.5).unwrap();
        for k in 0..g.len() {
            let expect = (a.points()[k] + b.points()[k]) / 2.0;
            assert!((mid.points()[k] - expect).norm() < 1e-15);
        }
        let quarter = geodesic(&a, &b, 0.25).unwrap();
        let via = geodesic(&a, &mid, 0.5).unwrap();
        for (x, y) in quarter.points().iter().zip(via.points()) {
            assert!((x - y).norm() < 1e-14);
        }
        assert!(geodesic(&a, &b, 1.5).is_err());
        assert!(geodesic(&a, &b, -0.1).is_err());
    }

    #[test]
    fn pca_contracts() {
        let g = make_grid(12, 10).unwrap();
        let data = cohort(g);
        let mean = mean_surface(&data).unwrap();
        let model = shape_pca(&data, &mean).unwrap();
        let gram = model.directions().transpose() * model.directions();
        assert!((gram - DMatrix::identity(6, 6)).amax() < 1e-8);
        let big = model.singulars().iter().filter(|&&s| s > 1e-10).count();
        assert!(big <= data.len() - 1);
        for w in model.singulars().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn scores_and_reconstruction() {
        let g = make_grid(12, 10).unwrap();
        let data = cohort(g);
        let mean = mean_surface(&data).unwrap();
        let model = shape_pca(&data, &mean).unwrap();
        let zero = pc_scores(&mean, &model, 4).unwrap();
        assert!(zero.0.iter().all(|z| z.abs() < 1e-12));
        assert_eq!(
            reconstruct(&PcScores(vec![0.0; 3]), &model).unwrap(),
            model.mean()
        );

        let dir0 = model.direction_surface(0).unwrap();
        let shifted = Surface::new(
            g,
            mean.points()
                .iter()
                .zip(dir0.points())
                .map(|(m, d)| m + d * 2.0)
                .collect(),
        )
        .unwrap();
        let z = pc_scores(&shifted, &model, 3).unwrap();
        assert!((z.0[0] - 2.0).abs() < 1e-10);
        assert!(z.0[1].abs() < 1e-10 && z.0[2].abs() < 1e-10);

        let full = model.n_directions();
        for f in &data {
            let rec = reconstruct(&pc_scores(f, &model, full).unwrap(), &model).unwrap();
            let err = rec.l2_distance(f) / f.l2_distance(&mean).max(1e-300);
            assert!(err < 1e-8);
        }
        assert!(pc_scores(&mean, &model, full + 1).is_err());
    }

    #[test]
    fn path_endpoints_are_one_sigma_away() {
        let g = make_grid(12, 10).unwrap();
        let data = cohort(g);
        let mean = mean_surface(&data).unwrap();
        let model = shape_pca(&data, &mean).unwrap();
        let path = pc_path(&model, 0, &[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(path[1], model.mean());
        for end in [&path[0], &path[2]] {
            let d: f64 = end
                .to_flat()
                .iter()
                .zip(mean.to_flat())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((d - model.singulars()[0]).abs() < 1e-10);
        }
        assert!(pc_path(&model, 99, &[0.0]).is_err());
    }

    #[test]
    fn diff_field_of_identical_is_zero() {
        let g = make_grid(8, 8).unwrap();
        let s = blob(g, 0.1, 0.1);
        assert!(diff_field(&s, &s).unwrap().iter().all(|&d| d == 0.0));
    }
}
