use nalgebra::{Matrix3, Vector3};

use super::SphericalGrid;
use crate::error::{Result, ShapeError};

/// A closed surface given as a map from grid nodes to points in R³.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    grid: SphericalGrid,
    points: Vec<Vector3<f64>>,
}

impl Surface {
    pub fn new(grid: SphericalGrid, points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() != grid.len() {
            return Err(ShapeError::DimensionMismatch(format!(
                "{} points for a {}x{} grid",
                points.len(),
                grid.n_u(),
                grid.n_v()
            )));
        }
        if let Some(k) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(ShapeError::NonFinite(k));
        }
        Ok(Self { grid, points })
    }

    /// Evaluate `f(theta, phi)` at every node.
    pub fn from_fn(grid: SphericalGrid, f: impl Fn(f64, f64) -> Vector3<f64>) -> Result<Self> {
        let points = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.coords(k);
                f(grid.theta(i), grid.phi(j))
            })
            .collect();
        Self::new(grid, points)
    }

    /// Rebuild from a flat `[x0, y0, z0, x1, ...]` vector.
    pub fn from_flat(grid: SphericalGrid, flat: &[f64]) -> Result<Self> {
        if flat.len() != 3 * grid.len() {
            return Err(ShapeError::DimensionMismatch(format!(
                "flat vector of length {} for {} nodes",
                flat.len(),
                grid.len()
            )));
        }
        let points = flat
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        Self::new(grid, points)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    #[inline]
    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    #[inline]
    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vector3<f64>> {
        self.points
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        self.map_points(|p| p + offset)
    }

    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        self.map_points(|p| rotation * p)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_points(|p| p * factor)
    }

    fn map_points(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Self {
        Self {
            grid: self.grid,
            points: self.points.iter().map(f).collect(),
        }
    }

    /// Area-weighted centroid; falls back to the vertex mean on a degenerate
    /// (zero-area) surface.
    pub fn centroid(&self) -> Vector3<f64> {
        let normals = normal_field(self);
        let mut acc = Vector3::zeros();
        let mut mass = 0.0;
        for (p, n) in self.points.iter().zip(normals.vectors()) {
            let w = n.norm();
            acc += p * w;
            mass += w;
        }
        if mass > 0.0 {
            acc / mass
        } else {
            self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
        }
    }

    /// Remove translation, and optionally scale to unit surface area.
    pub fn normalize(&self, unit_scale: bool) -> Result<Self> {
        let centered = self.translated(&-self.centroid());
        if !unit_scale {
            return Ok(centered);
        }
        let area = surface_area(&centered);
        if area <= 0.0 || !area.is_finite() {
            return Err(ShapeError::ZeroArea);
        }
        Ok(centered.scaled(1.0 / area.sqrt()))
    }

    /// Plain L² distance under the flat parameter measure.
    pub fn l2_distance(&self, other: &Surface) -> f64 {
        let sq: f64 = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        (sq * self.grid.cell_measure()).sqrt()
    }
}

/// Unnormalized normal `f_u x f_v` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    grid: SphericalGrid,
    vectors: Vec<Vector3<f64>>,
}

impl NormalField {
    #[inline]
    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    #[inline]
    pub fn vectors(&self) -> &[Vector3<f64>] {
        &self.vectors
    }
}

/// Finite-difference partial derivatives in `u` (azimuth) and `v` (polar
/// angle) of a per-node vector field.
///
/// Central differences everywhere in `u` (periodic). In `v`, central in the
/// interior and second-order one-sided on the first and last rows.
pub fn field_partials(
    grid: &SphericalGrid,
    values: &[Vector3<f64>],
) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let (n_u, n_v) = (grid.n_u(), grid.n_v());
    let inv_2du = 1.0 / (2.0 * grid.d_theta());
    let inv_2dv = 1.0 / (2.0 * grid.d_phi());
    let at = |i: usize, j: usize| &values[j * n_u + i];

    let mut fu = Vec::with_capacity(values.len());
    let mut fv = Vec::with_capacity(values.len());
    for j in 0..n_v {
        for i in 0..n_u {
            let ip = (i + 1) % n_u;
            let im = (i + n_u - 1) % n_u;
            fu.push((at(ip, j) - at(im, j)) * inv_2du);
            let dv = if j == 0 {
                -3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)
            } else if j == n_v - 1 {
                3.0 * at(i, j) - 4.0 * at(i, j - 1) + at(i, j - 2)
            } else {
                at(i, j + 1) - at(i, j - 1)
            };
            fv.push(dv * inv_2dv);
        }
    }
    (fu, fv)
}

/// Tangent vectors `(f_u, f_v)` of a surface.
pub fn partials(f: &Surface) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    field_partials(&f.grid, &f.points)
}

pub fn normal_field(f: &Surface) -> NormalField {
    let (fu, fv) = partials(f);
    let vectors = fu.iter().zip(&fv).map(|(a, b)| a.cross(b)).collect();
    NormalField {
        grid: f.grid,
        vectors,
    }
}

/// Surface area by quadrature of `|n|` over the parameter domain.
pub fn surface_area(f: &Surface) -> f64 {
    let nf = normal_field(f);
    nf.vectors.iter().map(|n| n.norm()).sum::<f64>() * f.grid.cell_measure()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn sphere(n: usize, r: f64) -> Surface {
        let g = make_grid(n, n).unwrap();
        Surface::from_fn(g, |t, p| SphericalGrid::embed(t, p) * r).unwrap()
    }

    fn partial_errors(n: usize) -> f64 {
        let f = sphere(n, 1.0);
        let (fu, fv) = partials(&f);
        let g = f.grid();
        let mut worst: f64 = 0.0;
        for k in 0..g.len() {
            let (i, j) = g.coords(k);
            let (t, p) = (g.theta(i), g.phi(j));
            let eu = Vector3::new(-p.sin() * t.sin(), p.sin() * t.cos(), 0.0);
            let ev = Vector3::new(p.cos() * t.cos(), p.cos() * t.sin(), -p.sin());
            worst = worst.max((fu[k] - eu).amax()).max((fv[k] - ev).amax());
        }
        worst
    }

    #[test]
    fn sphere_partials_match_analytic() {
        assert!(partial_errors(64) < 5e-3);
    }

    #[test]
    fn partials_are_second_order() {
        let e32 = partial_errors(32);
        let e64 = partial_errors(64);
        let e128 = partial_errors(128);
        let r1 = e32 / e64;
        let r2 = e64 / e128;
        assert!(r1 > 3.5 && r1 < 4.5, "{r1}");
        assert!(r2 > 3.5 && r2 < 4.5, "{r2}");
    }

    #[test]
    fn constant_surface_is_degenerate() {
        let g = make_grid(16, 16).unwrap();
        let c = Vector3::new(1.0, -2.0, 3.0);
        let f = Surface::new(g, vec![c; g.len()]).unwrap();
        let (fu, fv) = partials(&f);
        assert!(fu.iter().chain(&fv).all(|v| *v == Vector3::zeros()));
        assert!(normal_field(&f).vectors().iter().all(|n| n.norm() == 0.0));
        assert_eq!(surface_area(&f), 0.0);
        assert!(matches!(f.normalize(true), Err(ShapeError::ZeroArea)));
    }

    #[test]
    fn partials_are_linear() {
        let f = sphere(16, 1.0);
        let (fu, fv) = partials(&f);
        let (gu, gv) = partials(&f.scaled(2.0));
        for k in 0..fu.len() {
            assert!((gu[k] - fu[k] * 2.0).norm() < 1e-14);
            assert!((gv[k] - fv[k] * 2.0).norm() < 1e-14);
        }
    }

    #[test]
    fn sphere_normals_are_radial_with_sin_magnitude() {
        for &r in &[1.0, 2.5] {
            let f = sphere(64, r);
            let nf = normal_field(&f);
            let g = f.grid();
            for k in 0..g.len() {
                let (_, j) = g.coords(k);
                let n = nf.vectors()[k];
                let expect = r * r * g.phi(j).sin();
                assert!((n.norm() - expect).abs() < 5e-3 * r * r, "{k}");
                let radial = g.node_point(k);
                assert!((n.normalize().dot(&radial).abs() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sphere_area() {
        let a1 = surface_area(&sphere(64, 1.0));
        assert!((a1 - 4.0 * PI).abs() / (4.0 * PI) < 1e-2);
        let a2 = surface_area(&sphere(64, 2.0));
        assert!((a2 - 4.0 * a1).abs() < 1e-10 * a2);
    }

    #[test]
    fn normalize_centers_and_scales() {
        let f = sphere(32, 1.0).translated(&Vector3::new(5.0, 0.0, 0.0));
        let n = f.normalize(false).unwrap();
        assert!(n.centroid().norm() < 1e-12);
        let f3 = sphere(64, 3.0);
        let u = f3.normalize(true).unwrap();
        assert!((surface_area(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent_and_rotation_equivariant() {
        let g = make_grid(24, 20).unwrap();
        let f = Surface::from_fn(g, |t, p| {
            SphericalGrid::embed(t, p).component_mul(&Vector3::new(1.0, 0.7, 0.5))
                + Vector3::new(0.3, -1.0, 2.0)
        })
        .unwrap();
        let once = f.normalize(true).unwrap();
        let twice = once.normalize(true).unwrap();
        for (a, b) in once.points().iter().zip(twice.points()) {
            assert!((a - b).norm() < 1e-12);
        }
        let rot = *nalgebra::Rotation3::from_euler_angles(0.4, -0.2, 1.1).matrix();
        let c_rot = f.rotated(&rot).centroid();
        assert!((c_rot - rot * f.centroid()).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_points() {
        let g = make_grid(8, 8).unwrap();
        assert!(matches!(
            Surface::new(g, vec![Vector3::zeros(); 10]),
            Err(ShapeError::DimensionMismatch(_))
        ));
        let mut pts = vec![Vector3::zeros(); 64];
        pts[5].y = f64::NAN;
        assert!(matches!(
            Surface::new(g, pts),
            Err(ShapeError::NonFinite(5))
        ));
    }
}
