use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::grid::{SphericalGrid, Surface};
use crate::registration::basis::harmonic_values;

/// Analytic base shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeFamily {
    Sphere,
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Radius `1 + amplitude * sum_m Y_{degree, m}` with unit-mean-square
    /// real harmonics.
    BumpySphere {
        amplitude: f64,
        degree: usize,
    },
}

impl Default for ShapeFamily {
    fn default() -> Self {
        ShapeFamily::BumpySphere {
            amplitude: 0.12,
            degree: 3,
        }
    }
}

/// Evaluate a shape family on the grid.
pub fn gen_surface(family: &ShapeFamily, grid: &SphericalGrid) -> Result<Surface> {
    match *family {
        ShapeFamily::Sphere => Surface::from_fn(*grid, SphericalGrid::embed),
        ShapeFamily::Ellipsoid { a, b, c } => {
            if !(a > 0.0 && b > 0.0 && c > 0.0) {
                return Err(ShapeError::OutOfRange(format!(
                    "ellipsoid axes ({a}, {b}, {c}) must be positive"
                )));
            }
            let axes = Vector3::new(a, b, c);
            Surface::from_fn(*grid, |t, p| {
                SphericalGrid::embed(t, p).component_mul(&axes)
            })
        }
        ShapeFamily::BumpySphere { amplitude, degree } => {
            if !amplitude.is_finite() {
                return Err(ShapeError::OutOfRange(
                    "bump amplitude must be finite".into(),
                ));
            }
            if amplitude == 0.0 || degree == 0 {
                return Surface::from_fn(*grid, SphericalGrid::embed);
            }
            let first = (degree - 1) * (degree + 1);
            Surface::from_fn(*grid, |t, p| {
                let s = SphericalGrid::embed(t, p);
                let bump: f64 = harmonic_values(&s, degree)[first..].iter().sum();
                s * (1.0 + amplitude * bump)
            })
        }
    }
}

/// Radial displacement field `Y(s) * s` for a real harmonic of the given
/// degree and in-degree index, scaled to unit RMS pointwise magnitude.
pub fn radial_direction(
    grid: &SphericalGrid,
    degree: usize,
    index: usize,
) -> Result<Vec<Vector3<f64>>> {
    if degree == 0 || index > 2 * degree {
        return Err(ShapeError::OutOfRange(format!(
            "harmonic ({degree}, {index}) does not exist"
        )));
    }
    let offset = (degree - 1) * (degree + 1) + index;
    let field: Vec<Vector3<f64>> = grid
        .node_points()
        .iter()
        .map(|s| s * harmonic_values(s, degree)[offset])
        .collect();
    let rms = (field.iter().map(|v| v.norm_squared()).sum::<f64>() / field.len() as f64).sqrt();
    Ok(field.into_iter().map(|v| v / rms).collect())
}

/// Magnitude law for the two-sided PCA cohort: `x_i = scale * u_i` with
/// `u_i` uniform on `(0, 1]` for the first `n_positive` subjects and on
/// `[-1, 0)` for the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoefficientLaw {
    pub scale: f64,
    /// Size of the positive group; `None` splits the cohort in half.
    pub n_positive: Option<usize>,
}

impl Default for CoefficientLaw {
    fn default() -> Self {
        Self {
            scale: 1.0,
            n_positive: None,
        }
    }
}

/// Independent random stream for subject `index` under `seed`.
pub fn subject_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Two-sided cohort coefficients; deterministic per seed and subject.
pub fn pca_coefficients(law: &CoefficientLaw, n: usize, seed: u64) -> Vec<f64> {
    let n_pos = law.n_positive.unwrap_or(n / 2).min(n);
    (0..n)
        .map(|i| {
            let mut rng = subject_rng(seed, i);
            // 1 - U[0, 1) lies in (0, 1]
            let mag = 1.0 - rng.random::<f64>();
            let sign = if i < n_pos { 1.0 } else { -1.0 };
            sign * mag * law.scale
        })
        .collect()
}

/// Surfaces `mean + x_i v` for a flattened direction `v` of length
/// `3 * n_u * n_v` (layout of [`Surface::to_flat`]).
pub fn gen_pca_cohort(
    mean: &Surface,
    direction: &[f64],
    law: &CoefficientLaw,
    n: usize,
    seed: u64,
) -> Result<(Vec<Surface>, Vec<f64>)> {
    let base = mean.to_flat();
    if direction.len() != base.len() {
        return Err(ShapeError::DimensionMismatch(format!(
            "direction of length {} for a mean of length {}",
            direction.len(),
            base.len()
        )));
    }
    let coeffs = pca_coefficients(law, n, seed);
    let surfaces = coeffs
        .iter()
        .map(|&x| {
            let flat: Vec<f64> = base.iter().zip(direction).map(|(m, v)| m + v * x).collect();
            Surface::from_flat(*mean.grid(), &flat)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((surfaces, coeffs))
}

/// Flatten a per-node field and scale it to unit Euclidean norm.
pub fn unit_flat(field: &[Vector3<f64>]) -> Result<Vec<f64>> {
    let flat: Vec<f64> = field.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    let norm = flat.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(ShapeError::OutOfRange(
            "direction has zero or non-finite norm".into(),
        ));
    }
    Ok(flat.into_iter().map(|x| x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, surface_area};
    use std::f64::consts::PI;

    #[test]
    fn families_agree_at_degenerate_parameters() {
        let g = make_grid(32, 32).unwrap();
        let sphere = gen_surface(&ShapeFamily::Sphere, &g).unwrap();
        let a = surface_area(&sphere);
        assert!((a - 4.0 * PI).abs() / (4.0 * PI) < 1e-2);
        let e = gen_surface(
            &ShapeFamily::Ellipsoid {
                a: 1.0,
                b: 1.0,
                c: 1.0,
            },
            &g,
        )
        .unwrap();
        assert_eq!(e, sphere);
        let b = gen_surface(
            &ShapeFamily::BumpySphere {
                amplitude: 0.0,
                degree: 3,
            },
            &g,
        )
        .unwrap();
        assert_eq!(b, sphere);
        assert!(gen_surface(
            &ShapeFamily::Ellipsoid {
                a: 1.0,
                b: 0.0,
                c: 1.0
            },
            &g
        )
        .is_err());
    }

    #[test]
    fn two_sided_split() {
        let c = pca_coefficients(&CoefficientLaw::default(), 40, 9);
        assert_eq!(c.iter().filter(|&&x| x > 0.0).count(), 20);
        assert_eq!(c.iter().filter(|&&x| x < 0.0).count(), 20);
        assert!(c.iter().all(|x| x.abs() <= 1.0 && *x != 0.0));
        assert_eq!(c, pca_coefficients(&CoefficientLaw::default(), 40, 9));
        // growing the cohort keeps earlier subjects' magnitudes
        let more = pca_coefficients(
            &CoefficientLaw {
                scale: 1.0,
                n_positive: Some(20),
            },
            50,
            9,
        );
        assert_eq!(&more[..20], &c[..20]);
    }

    #[test]
    fn zero_coefficients_give_copies() {
        let g = make_grid(12, 12).unwrap();
        let mean = gen_surface(&ShapeFamily::default(), &g).unwrap();
        let dir = unit_flat(&radial_direction(&g, 2, 1).unwrap()).unwrap();
        let law = CoefficientLaw {
            scale: 0.0,
            n_positive: None,
        };
        let (cohort, _) = gen_pca_cohort(&mean, &dir, &law, 6, 1).unwrap();
        assert!(cohort.iter().all(|s| *s == mean));
    }
}
