//! Registration of surfaces under rotation and reparameterization, realizing
//! the elastic shape distance
//! `d_s(f1, f2) = min_{O, gamma} ||q1 - O (q2 * gamma)||`.
//!
//! Rotation is solved in closed form (Procrustes); reparameterization by
//! gradient descent over a harmonic tangent basis. The two alternate for a
//! fixed number of rounds.

pub mod basis;
pub mod diffeo;
pub mod reparam;
pub mod rotation;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::grid::Surface;
use crate::srnf::{pullback, srnf, srnf_action};

pub use diffeo::{compose, identity_diffeo, jacobian_det, mean_diffeo, random_diffeo, Diffeo};
pub use reparam::{optimize_reparam, optimize_reparam_from, ReparamObjective, ReparamOptions};
pub use rotation::{optimal_rotation, procrustes, Rotation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationOptions {
    /// Rotation/reparameterization alternation rounds.
    pub rounds: usize,
    pub reparam: ReparamOptions,
    /// Raise the basis degree by one per round, ending at
    /// `reparam.max_degree`. Low degrees first avoid local minima that a
    /// full-degree start gets caught in.
    pub coarse_to_fine: bool,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        Self {
            rounds: 3,
            reparam: ReparamOptions {
                max_degree: 4,
                ..ReparamOptions::default()
            },
            coarse_to_fine: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// `O* (f2 o gamma*)`.
    pub aligned: Surface,
    pub rotation: Rotation,
    pub reparam: Diffeo,
    /// Elastic shape distance; equal to the last trace entry.
    pub distance: f64,
    /// SRNF distance after every rotation update and accepted descent step.
    pub objective_trace: Vec<f64>,
}

/// Register `f2` onto `f1`, which stays fixed.
pub fn register(
    f1: &Surface,
    f2: &Surface,
    opts: &RegistrationOptions,
) -> Result<RegistrationResult> {
    if f1.grid() != f2.grid() {
        return Err(ShapeError::DimensionMismatch(
            "registered surfaces live on different grids".into(),
        ));
    }
    let grid = *f1.grid();
    let q1 = srnf(f1);
    let q2 = srnf(f2);

    let mut gamma = Diffeo::identity(grid);
    let mut rotation = Rotation::identity();
    let mut acted = q2.clone();
    let mut trace = vec![q1.distance(&q2)];

    for round in 0..opts.rounds {
        let r = optimal_rotation(&q1, &acted);
        let rotated = acted.rotated(r.matrix());
        let d = q1.distance(&rotated);
        // Procrustes is optimal for the current map, so this never increases
        // the distance beyond rounding; keep the old rotation if it would.
        if d <= *trace.last().unwrap() {
            rotation = r;
            trace.push(d);
        }
        let q2_rot = q2.rotated(rotation.matrix());
        let mut ropts = opts.reparam.clone();
        if opts.coarse_to_fine {
            ropts.max_degree = (ropts.max_degree + round + 1)
                .saturating_sub(opts.rounds)
                .max(1);
        }
        let out = optimize_reparam_from(&q1, &q2_rot, gamma, &ropts)?;
        trace.extend(out.trace.iter().skip(1).map(|e| e.sqrt()));
        gamma = out.diffeo;
        acted = srnf_action(&q2, &gamma)?;
    }

    let aligned = pullback(f2, &gamma)?.rotated(rotation.matrix());
    let distance = *trace.last().unwrap();
    Ok(RegistrationResult {
        aligned,
        rotation,
        reparam: gamma,
        distance,
        objective_trace: trace,
    })
}

/// Elastic shape distance between two surfaces.
pub fn shape_distance(f1: &Surface, f2: &Surface, opts: &RegistrationOptions) -> Result<f64> {
    register(f1, f2, opts).map(|r| r.distance)
}
