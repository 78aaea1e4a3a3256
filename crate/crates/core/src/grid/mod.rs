//! Discrete spherical domain and the surfaces sampled on it.
//!
//! The grid is cell-centered in the polar angle so no node sits on a pole:
//! `theta_i = i * 2pi / n_u` (periodic) and `phi_j = (j + 0.5) * pi / n_v`.
//! Node storage is row-major in `v` then `u`, i.e. `idx = j * n_u + i`.

mod io;
mod surface;

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Result, ShapeError};

pub use io::{export_obj, load_surface, save_surface, save_surface_binary, SURFACE_MAGIC};
pub use surface::{field_partials, normal_field, partials, surface_area, NormalField, Surface};

/// Remove translation and optionally scale to unit area.
pub fn normalize(f: &Surface, unit_scale: bool) -> Result<Surface> {
    f.normalize(unit_scale)
}

/// Smallest accepted node count along either axis.
pub const MIN_NODES: usize = 8;

/// Fractional grid coordinates closer than this to an integer are snapped,
/// so that sampling exactly at a node reproduces the stored value.
const SNAP_TOL: f64 = 1e-9;

/// Cell-centered discretization of the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SphericalGrid {
    n_u: usize,
    n_v: usize,
}

/// Build a grid with `n_u` azimuthal and `n_v` polar nodes.
pub fn make_grid(n_u: usize, n_v: usize) -> Result<SphericalGrid> {
    SphericalGrid::new(n_u, n_v)
}

impl SphericalGrid {
    pub fn new(n_u: usize, n_v: usize) -> Result<Self> {
        if n_u < MIN_NODES || n_v < MIN_NODES {
            return Err(ShapeError::GridTooSmall { n_u, n_v });
        }
        Ok(Self { n_u, n_v })
    }

    #[inline]
    pub fn n_u(&self) -> usize {
        self.n_u
    }

    #[inline]
    pub fn n_v(&self) -> usize {
        self.n_v
    }

    /// Total node count `n_u * n_v`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn d_theta(&self) -> f64 {
        2.0 * PI / self.n_u as f64
    }

    #[inline]
    pub fn d_phi(&self) -> f64 {
        PI / self.n_v as f64
    }

    /// Flat parameter-domain cell measure `dtheta * dphi`.
    #[inline]
    pub fn cell_measure(&self) -> f64 {
        self.d_theta() * self.d_phi()
    }

    #[inline]
    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.d_theta()
    }

    #[inline]
    pub fn phi(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.d_phi()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_u + i
    }

    /// Inverse of [`SphericalGrid::index`]: `(i, j)`.
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n_u, idx / self.n_u)
    }

    /// Area quadrature weight `sin(phi) * dtheta * dphi` of a node.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let (_, j) = self.coords(idx);
        self.phi(j).sin() * self.cell_measure()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    /// Unit vector on S² at spherical coordinates `(theta, phi)`.
    #[inline]
    pub fn embed(theta: f64, phi: f64) -> Vector3<f64> {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Vector3::new(sp * ct, sp * st, cp)
    }

    /// Position of node `idx` on the unit sphere.
    #[inline]
    pub fn node_point(&self, idx: usize) -> Vector3<f64> {
        let (i, j) = self.coords(idx);
        Self::embed(self.theta(i), self.phi(j))
    }

    pub fn node_points(&self) -> Vec<Vector3<f64>> {
        (0..self.len()).map(|k| self.node_point(k)).collect()
    }

    /// Bilinear interpolation stencil for an arbitrary point on the sphere.
    ///
    /// Beyond the first and last rows the stencil reaches across the pole to
    /// the same row at `theta + pi`, so Cartesian-valued fields interpolate
    /// continuously through the poles.
    pub fn stencil(&self, p: &Vector3<f64>) -> Stencil {
        let n_u = self.n_u;
        let n_v = self.n_v;
        let theta = p.y.atan2(p.x).rem_euclid(2.0 * PI);
        let phi = p.x.hypot(p.y).atan2(p.z);

        let u = snap(theta / self.d_theta());
        let v = snap(phi / self.d_phi() - 0.5);

        let row = |j: usize, u: f64| -> [(usize, f64); 2] {
            let u = u.rem_euclid(n_u as f64);
            let i0 = (u.floor() as usize).min(n_u - 1);
            let a = u - i0 as f64;
            let i1 = (i0 + 1) % n_u;
            [(j * n_u + i0, 1.0 - a), (j * n_u + i1, a)]
        };
        let half = n_u as f64 / 2.0;

        let (lo, hi, b) = if v < 0.0 {
            (row(0, u + half), row(0, u), v + 1.0)
        } else if v > (n_v - 1) as f64 {
            (
                row(n_v - 1, u),
                row(n_v - 1, u + half),
                v - (n_v - 1) as f64,
            )
        } else {
            let j0 = (v.floor() as usize).min(n_v - 2);
            let b = v - j0 as f64;
            (row(j0, u), row(j0 + 1, u), b)
        };

        Stencil([
            (lo[0].0, lo[0].1 * (1.0 - b)),
            (lo[1].0, lo[1].1 * (1.0 - b)),
            (hi[0].0, hi[0].1 * b),
            (hi[1].0, hi[1].1 * b),
        ])
    }
}

impl SphericalGrid {
    /// Bicubic (Catmull-Rom) interpolation stencil over a 4x4 node patch.
    ///
    /// Rows outside the grid are taken from across the pole, as in
    /// [`SphericalGrid::stencil`]. Weights sum to one but may be negative.
    /// Used where derivatives of the interpolated field matter (composition
    /// of maps, pulled-back surfaces).
    pub fn cubic_stencil(&self, p: &Vector3<f64>) -> CubicStencil {
        let n_u = self.n_u as isize;
        let n_v = self.n_v as isize;
        let theta = p.y.atan2(p.x).rem_euclid(2.0 * PI);
        let phi = p.x.hypot(p.y).atan2(p.z);
        let u = snap(theta / self.d_theta());
        let v = snap(phi / self.d_phi() - 0.5);

        let i0 = u.floor();
        let j0 = v.floor();
        let wu = catmull_rom(u - i0);
        let wv = catmull_rom(v - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);

        let mut out = [(0usize, 0.0f64); 16];
        for (b, wb) in wv.iter().enumerate() {
            let mut j = j0 - 1 + b as isize;
            let mut shift = 0;
            if j < 0 {
                j = -1 - j;
                shift = n_u / 2;
            } else if j >= n_v {
                j = 2 * n_v - 1 - j;
                shift = n_u / 2;
            }
            for (a, wa) in wu.iter().enumerate() {
                let i = (i0 - 1 + a as isize + shift).rem_euclid(n_u);
                out[4 * b + a] = ((j * n_u + i) as usize, wa * wb);
            }
        }
        CubicStencil(out)
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Sixteen (node, weight) pairs whose weights sum to one.
#[derive(Debug, Clone, Copy)]
pub struct CubicStencil(pub [(usize, f64); 16]);

impl CubicStencil {
    #[inline]
    pub fn apply(&self, field: &[Vector3<f64>]) -> Vector3<f64> {
        self.0
            .iter()
            .filter(|(_, w)| *w != 0.0)
            .fold(Vector3::zeros(), |acc, &(k, w)| acc + field[k] * w)
    }
}

/// Bicubic counterpart of [`interpolate`].
pub fn interpolate_cubic(
    grid: &SphericalGrid,
    field: &[Vector3<f64>],
    at: &[Vector3<f64>],
) -> Vec<Vector3<f64>> {
    at.iter()
        .map(|p| grid.cubic_stencil(p).apply(field))
        .collect()
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP_TOL {
        r
    } else {
        x
    }
}

/// Four (node, weight) pairs whose weights sum to one.
#[derive(Debug, Clone, Copy)]
pub struct Stencil(pub [(usize, f64); 4]);

impl Stencil {
    /// Apply the stencil to a per-node vector field.
    #[inline]
    pub fn apply(&self, field: &[Vector3<f64>]) -> Vector3<f64> {
        self.0
            .iter()
            .filter(|(_, w)| *w != 0.0)
            .fold(Vector3::zeros(), |acc, &(k, w)| acc + field[k] * w)
    }
}

/// Sample a per-node vector field at arbitrary sphere points.
pub fn interpolate(
    grid: &SphericalGrid,
    field: &[Vector3<f64>],
    at: &[Vector3<f64>],
) -> Vec<Vector3<f64>> {
    at.iter().map(|p| grid.stencil(p).apply(field)).collect()
}
