use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::srnf::SrnfField;

/// A proper rotation in SO(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validate orthogonality and unit determinant.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if ortho > Self::TOLERANCE || (det - 1.0).abs() > Self::TOLERANCE {
            return Err(ShapeError::Numerical(format!(
                "not a rotation: |O^T O - I| = {ortho:.3e}, det = {det}"
            )));
        }
        Ok(Rotation(m))
    }

    pub fn from_euler_angles(roll: f64, pitch: f64, yaw: f64) -> Self {
        Rotation(*nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw).matrix())
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }
}

/// Sign-corrected SVD solution of the orthogonal Procrustes problem:
/// the rotation `O` maximizing `tr(O^T A)` for a 3x3 correlation `A`.
pub fn procrustes(a: &Matrix3<f64>) -> Rotation {
    let svd = a.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let d = (u * v_t).determinant().signum();
    let d = if d == 0.0 { 1.0 } else { d };
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    Rotation(u * fix * v_t)
}

/// Rotation `O*` minimizing `||q1 - O q2||`.
///
/// # Panics
/// If the fields live on different grids.
pub fn optimal_rotation(q1: &SrnfField, q2: &SrnfField) -> Rotation {
    assert_eq!(q1.grid(), q2.grid(), "SRNF fields on different grids");
    let a = q1
        .values()
        .iter()
        .zip(q2.values())
        .fold(Matrix3::zeros(), |acc, (x, y)| acc + x * y.transpose())
        * q1.grid().cell_measure();
    procrustes(&a)
}
