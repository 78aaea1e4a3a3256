//! Square-root normal fields and the reparameterization action on them.
//!
//! `q(s) = n(s) / |n(s)|^{1/2}` with `n = f_u x f_v`. Inner products use the
//! flat parameter measure `dtheta dphi`, under which the action
//! `(q * gamma)(s) = sqrt(J(s)) q(gamma(s))` is an isometry.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Result, ShapeError};
use crate::grid::{normal_field, SphericalGrid, Surface};
use crate::registration::diffeo::{AreaReference, Diffeo};

/// Floor applied to `|n|` before taking the square root.
pub const NORMAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SrnfField {
    grid: SphericalGrid,
    q: Vec<Vector3<f64>>,
}

impl SrnfField {
    pub fn new(grid: SphericalGrid, q: Vec<Vector3<f64>>) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(ShapeError::DimensionMismatch(format!(
                "SRNF has {} nodes, grid has {}",
                q.len(),
                grid.len()
            )));
        }
        if let Some(k) = q.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(ShapeError::NonFinite(k));
        }
        Ok(Self { grid, q })
    }

    pub(crate) fn from_parts(grid: SphericalGrid, q: Vec<Vector3<f64>>) -> Self {
        debug_assert_eq!(q.len(), grid.len());
        Self { grid, q }
    }

    #[inline]
    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Vector3<f64>] {
        &self.q
    }

    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        Self {
            grid: self.grid,
            q: self.q.iter().map(|v| rotation * v).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            q: self.q.iter().map(|v| v * a).collect(),
        }
    }

    pub fn inner(&self, other: &SrnfField) -> f64 {
        inner(self, other)
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &SrnfField) -> f64 {
        distance_sq(&self.q, &other.q, &self.grid).sqrt()
    }
}

pub(crate) fn distance_sq(a: &[Vector3<f64>], b: &[Vector3<f64>], grid: &SphericalGrid) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        * grid.cell_measure()
}

/// Square-root normal field of a surface.
pub fn srnf(f: &Surface) -> SrnfField {
    let nf = normal_field(f);
    let q = nf
        .vectors()
        .iter()
        .map(|n| n / n.norm().max(NORMAL_FLOOR).sqrt())
        .collect();
    SrnfField::from_parts(*f.grid(), q)
}

/// Discrete L² inner product `sum q1 . q2 dtheta dphi`.
///
/// # Panics
/// If the fields live on different grids.
pub fn inner(q1: &SrnfField, q2: &SrnfField) -> f64 {
    assert_eq!(q1.grid, q2.grid, "SRNF fields on different grids");
    q1.q.iter().zip(&q2.q).map(|(a, b)| a.dot(b)).sum::<f64>() * q1.grid.cell_measure()
}

pub fn norm(q: &SrnfField) -> f64 {
    inner(q, q).sqrt()
}

/// Evaluates `q * gamma` for many candidate maps against a fixed `q`.
///
/// Interpolation runs on the area-normalized field `q / sqrt(sin phi)`,
/// which is smooth through the poles; the node's own `sqrt(sin phi)` is
/// multiplied back afterwards.
#[derive(Debug, Clone)]
pub struct ActionEvaluator {
    grid: SphericalGrid,
    normalized: Vec<Vector3<f64>>,
    sqrt_sin: Vec<f64>,
    area: AreaReference,
}

impl ActionEvaluator {
    pub fn new(q: &SrnfField) -> Self {
        let grid = q.grid;
        let sqrt_sin: Vec<f64> = (0..grid.len())
            .map(|k| grid.phi(grid.coords(k).1).sin().sqrt())
            .collect();
        let normalized = q.q.iter().zip(&sqrt_sin).map(|(v, s)| v / *s).collect();
        Self {
            grid,
            normalized,
            sqrt_sin,
            area: AreaReference::new(grid),
        }
    }

    pub fn area_reference(&self) -> &AreaReference {
        &self.area
    }

    /// Act with the map whose node images are `image` (unit vectors).
    pub fn act(&self, image: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
        let jac = self.area.jacobian(image);
        image
            .iter()
            .zip(jac)
            .zip(&self.sqrt_sin)
            .enumerate()
            .map(|(node, ((p, det), s))| {
                if !(det > 0.0) {
                    return Err(ShapeError::Orientation { node, det });
                }
                let v = self.grid.stencil(p).apply(&self.normalized);
                Ok(v * (det.sqrt() * s))
            })
            .collect()
    }
}

/// `(q * gamma)(s) = sqrt(J_gamma(s)) q(gamma(s))`.
pub fn srnf_action(q: &SrnfField, g: &Diffeo) -> Result<SrnfField> {
    if q.grid != *g.grid() {
        return Err(ShapeError::DimensionMismatch(
            "SRNF and diffeo live on different grids".into(),
        ));
    }
    let values = ActionEvaluator::new(q).act(g.image())?;
    Ok(SrnfField::from_parts(q.grid, values))
}

/// The reparameterized surface `f o gamma`, sampled by interpolation.
pub fn pullback(f: &Surface, g: &Diffeo) -> Result<Surface> {
    if f.grid() != g.grid() {
        return Err(ShapeError::DimensionMismatch(
            "surface and diffeo live on different grids".into(),
        ));
    }
    let pts = g
        .image()
        .iter()
        .map(|p| f.grid().cubic_stencil(p).apply(f.points()))
        .collect();
    Surface::new(*f.grid(), pts)
}
