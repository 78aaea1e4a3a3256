//! Grid-sampled orientation-preserving maps of the sphere.

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::basis::{basis_len, tangent_basis_at};
use crate::error::{Result, ShapeError};
use crate::grid::{field_partials, SphericalGrid};

/// Number of small flows composed by [`random_diffeo`].
pub const RANDOM_FLOWS: usize = 5;
const GENERATION_RETRIES: usize = 10;
const INVERSE_ITERATIONS: usize = 30;

/// An element of the reparameterization group, stored as the image
/// `gamma(s)` of every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffeo {
    grid: SphericalGrid,
    image: Vec<Vector3<f64>>,
}

impl Diffeo {
    /// Wrap an image field; every vector is projected back onto S².
    /// Orientation is checked.
    pub fn new(grid: SphericalGrid, image: Vec<Vector3<f64>>) -> Result<Self> {
        let d = Self::unchecked(grid, image)?;
        d.check_orientation()?;
        Ok(d)
    }

    pub(crate) fn unchecked(grid: SphericalGrid, image: Vec<Vector3<f64>>) -> Result<Self> {
        if image.len() != grid.len() {
            return Err(ShapeError::DimensionMismatch(format!(
                "diffeo image has {} nodes, grid has {}",
                image.len(),
                grid.len()
            )));
        }
        let image = image
            .into_iter()
            .enumerate()
            .map(|(k, p)| {
                let n = p.norm();
                if n > 0.0 && n.is_finite() {
                    Ok(p / n)
                } else {
                    Err(ShapeError::NonFinite(k))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, image })
    }

    pub fn identity(grid: SphericalGrid) -> Self {
        Self {
            grid,
            image: grid.node_points(),
        }
    }

    /// The diffeo `s -> R s` induced by a rotation.
    pub fn from_rotation(grid: SphericalGrid, rotation: &Matrix3<f64>) -> Result<Self> {
        let image = grid.node_points().iter().map(|p| rotation * p).collect();
        Self::new(grid, image)
    }

    #[inline]
    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    #[inline]
    pub fn image(&self) -> &[Vector3<f64>] {
        &self.image
    }

    /// Largest geodesic-chord displacement `max |gamma(s) - s|`.
    pub fn max_displacement(&self) -> f64 {
        self.image
            .iter()
            .enumerate()
            .map(|(k, p)| (p - self.grid.node_point(k)).norm())
            .fold(0.0, f64::max)
    }

    /// `g1(g2(s))`, with `g1` evaluated off-grid by spherical interpolation.
    pub fn compose(&self, inner: &Diffeo) -> Result<Diffeo> {
        let g = compose_unchecked(self, inner)?;
        g.check_orientation()?;
        Ok(g)
    }

    pub fn jacobian_det(&self) -> Vec<f64> {
        jacobian_det(self)
    }

    /// Approximate inverse: at every node `s`, Gauss-Newton on
    /// `|gamma(y) - s|` over `y` on the sphere, with `gamma` interpolated
    /// off-grid and a finite-difference tangent Jacobian.
    pub fn inverse(&self) -> Result<Diffeo> {
        let eval = |y: &Vector3<f64>| self.grid.cubic_stencil(y).apply(&self.image);
        let image = self
            .grid
            .node_points()
            .iter()
            .map(|s| {
                let mut y = *s;
                let mut r = eval(&y) - s;
                for _ in 0..INVERSE_ITERATIONS {
                    if r.norm() < 1e-12 {
                        break;
                    }
                    let (e1, e2) = tangent_frame(&y);
                    let h = 1e-6;
                    let d1 = (eval(&(y + e1 * h).normalize()) - eval(&(y - e1 * h).normalize()))
                        / (2.0 * h);
                    let d2 = (eval(&(y + e2 * h).normalize()) - eval(&(y - e2 * h).normalize()))
                        / (2.0 * h);
                    let jtj =
                        nalgebra::Matrix2::new(d1.dot(&d1), d1.dot(&d2), d1.dot(&d2), d2.dot(&d2));
                    let Some(inv) = jtj.try_inverse() else { break };
                    let step = inv * nalgebra::Vector2::new(-d1.dot(&r), -d2.dot(&r));
                    // halve the step until the residual shrinks
                    let mut t = 1.0;
                    let mut moved = false;
                    while t > 1e-4 {
                        let cand = (y + (e1 * step.x + e2 * step.y) * t).normalize();
                        let rc = eval(&cand) - s;
                        if rc.norm() < r.norm() {
                            (y, r) = (cand, rc);
                            moved = true;
                            break;
                        }
                        t *= 0.5;
                    }
                    if !moved {
                        break;
                    }
                }
                y
            })
            .collect();
        Diffeo::new(self.grid, image)
    }

    fn check_orientation(&self) -> Result<()> {
        let det = self.jacobian_det();
        match det.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
            Some((node, &det)) => Err(ShapeError::Orientation { node, det }),
            None => Ok(()),
        }
    }
}

pub fn identity_diffeo(grid: &SphericalGrid) -> Diffeo {
    Diffeo::identity(*grid)
}

/// Orthonormal tangent pair at a unit vector.
fn tangent_frame(y: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if y.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = y.cross(&helper).normalize();
    (e1, y.cross(&e1))
}

/// Extrinsic average of maps on one grid: node images are averaged in R³
/// and projected back onto the sphere.
pub fn mean_diffeo(maps: &[Diffeo]) -> Result<Diffeo> {
    let first = maps
        .first()
        .ok_or(ShapeError::TooFewInputs { needed: 1, got: 0 })?;
    let mut acc = vec![Vector3::zeros(); first.grid.len()];
    for m in maps {
        if m.grid != first.grid {
            return Err(ShapeError::DimensionMismatch(
                "averaged diffeos live on different grids".into(),
            ));
        }
        for (a, p) in acc.iter_mut().zip(&m.image) {
            *a += p;
        }
    }
    Diffeo::new(first.grid, acc)
}

/// `compose(g1, g2)(s) = g1(g2(s))`.
pub fn compose(g1: &Diffeo, g2: &Diffeo) -> Result<Diffeo> {
    g1.compose(g2)
}

pub(crate) fn compose_unchecked(outer: &Diffeo, inner: &Diffeo) -> Result<Diffeo> {
    if outer.grid != inner.grid {
        return Err(ShapeError::DimensionMismatch(
            "composed diffeos live on different grids".into(),
        ));
    }
    let image = inner
        .image
        .iter()
        .map(|p| outer.grid.cubic_stencil(p).apply(&outer.image))
        .collect();
    Diffeo::unchecked(outer.grid, image)
}

/// Per-node oriented `(f_u x f_v) . f` for a field of unit vectors.
fn oriented_area(grid: &SphericalGrid, image: &[Vector3<f64>]) -> Vec<f64> {
    let (gu, gv) = field_partials(grid, image);
    gu.iter()
        .zip(&gv)
        .zip(image)
        .map(|((a, b), p)| a.cross(b).dot(p))
        .collect()
}

/// Reference oriented area of the identity map, for normalizing Jacobians.
#[derive(Debug, Clone)]
pub struct AreaReference {
    grid: SphericalGrid,
    identity: Vec<f64>,
}

impl AreaReference {
    pub fn new(grid: SphericalGrid) -> Self {
        Self {
            grid,
            identity: oriented_area(&grid, &grid.node_points()),
        }
    }

    /// Area-ratio Jacobian determinant of an image field.
    ///
    /// The image's finite-difference area element is divided by the identity
    /// map's element computed with the same stencils, so identity and
    /// rotations give exactly one up to rounding.
    pub fn jacobian(&self, image: &[Vector3<f64>]) -> Vec<f64> {
        oriented_area(&self.grid, image)
            .into_iter()
            .zip(&self.identity)
            .map(|(a, r)| a / r)
            .collect()
    }
}

/// Jacobian determinant of `g` in the sphere-area ratio convention.
pub fn jacobian_det(g: &Diffeo) -> Vec<f64> {
    AreaReference::new(g.grid).jacobian(&g.image)
}

/// Flow a batch of points through `RANDOM_FLOWS` random tangent fields.
fn flow_points(
    points: &[Vector3<f64>],
    coeffs: &[Vec<f64>],
    scale: f64,
    max_degree: usize,
) -> Vec<Vector3<f64>> {
    points
        .iter()
        .map(|&start| {
            coeffs.iter().fold(start, |p, flow| {
                let step = tangent_basis_at(&p, max_degree)
                    .iter()
                    .zip(flow)
                    .fold(Vector3::zeros(), |acc, (b, c)| acc + b * (c * scale));
                (p + step).normalize()
            })
        })
        .collect()
}

/// Random smooth reparameterization.
///
/// Composes [`RANDOM_FLOWS`] small flows, each moving points along a random
/// combination of gradient and rotated-gradient harmonic fields of degree
/// `<= max_degree`. Coefficients are standard normal scaled so that every
/// flow has root-mean-square displacement of about `magnitude / RANDOM_FLOWS`.
/// If the result folds over, the magnitude is halved and the same
/// coefficients are retried.
pub fn random_diffeo(
    grid: &SphericalGrid,
    seed: u64,
    magnitude: f64,
    max_degree: usize,
) -> Result<Diffeo> {
    if magnitude == 0.0 || max_degree == 0 {
        return Ok(Diffeo::identity(*grid));
    }
    if !magnitude.is_finite() || magnitude < 0.0 {
        return Err(ShapeError::OutOfRange(format!(
            "diffeo magnitude {magnitude} must be finite and nonnegative"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = basis_len(max_degree);
    let coeffs: Vec<Vec<f64>> = (0..RANDOM_FLOWS)
        .map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let base = magnitude / (RANDOM_FLOWS as f64 * (k as f64).sqrt());
    let nodes = grid.node_points();
    let reference = AreaReference::new(*grid);

    let mut scale = base;
    for attempt in 0..=GENERATION_RETRIES {
        let image = flow_points(&nodes, &coeffs, scale, max_degree);
        if reference.jacobian(&image).iter().all(|&d| d > 0.0) {
            return Diffeo::unchecked(*grid, image);
        }
        log::debug!("random diffeo attempt {attempt} folded; halving magnitude");
        scale *= 0.5;
    }
    Err(ShapeError::DiffeoGeneration {
        retries: GENERATION_RETRIES,
    })
}
