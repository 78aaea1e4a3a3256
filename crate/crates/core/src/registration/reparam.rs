//! Gradient descent over reparameterizations.
//!
//! Each iteration perturbs the current map by a small flow
//! `s -> normalize(s + sum_k c_k b_k(s))` built from the harmonic tangent
//! basis, estimates the gradient of the objective in the coefficients `c` by
//! central differences, and takes a backtracking step along the negative
//! gradient. Accepted steps are accumulated as `gamma <- gamma o gamma_step`
//! so the SRNF is always acted on by one composite map.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::basis::TangentBasis;
use super::diffeo::{compose_unchecked, Diffeo};
use crate::error::{Result, ShapeError};
use crate::srnf::{distance_sq, ActionEvaluator, SrnfField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReparamOptions {
    pub max_iters: usize,
    /// Stop when `(E_prev - E) / E_prev` falls below this.
    pub tol_rel: f64,
    /// Highest harmonic degree in the tangent basis.
    pub max_degree: usize,
    /// First trial step length (RMS displacement, radians).
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Coefficient increment for the finite-difference gradient.
    pub fd_step: f64,
    /// Use Polak-Ribiere conjugate directions instead of the plain negative
    /// gradient.
    pub conjugate: bool,
}

impl Default for ReparamOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol_rel: 1e-5,
            max_degree: 3,
            initial_step: 0.05,
            max_step: 0.5,
            min_step: 1e-8,
            fd_step: 1e-6,
            conjugate: true,
        }
    }
}

/// `E(c) = ||q1 - q2 * (gamma o gamma_c)||²` for flows `gamma_c` near the
/// identity, around a fixed current map `gamma`.
pub struct ReparamObjective<'a> {
    target: &'a SrnfField,
    evaluator: &'a ActionEvaluator,
    gamma: &'a Diffeo,
    nodes: &'a [Vector3<f64>],
    basis: &'a TangentBasis,
}

impl<'a> ReparamObjective<'a> {
    pub fn new(
        target: &'a SrnfField,
        evaluator: &'a ActionEvaluator,
        gamma: &'a Diffeo,
        nodes: &'a [Vector3<f64>],
        basis: &'a TangentBasis,
    ) -> Self {
        Self {
            target,
            evaluator,
            gamma,
            nodes,
            basis,
        }
    }

    /// Node images of the flow with coefficients `coeffs`.
    pub fn flow(&self, coeffs: &[f64]) -> Vec<Vector3<f64>> {
        flow_image(self.nodes, self.basis, coeffs)
    }

    /// The composite map `gamma o gamma_c`, unchecked for orientation.
    pub fn candidate(&self, coeffs: &[f64]) -> Result<Diffeo> {
        let flow = Diffeo::unchecked(*self.gamma.grid(), self.flow(coeffs))?;
        compose_unchecked(self.gamma, &flow)
    }

    /// Energy and acted field of the composite map.
    pub fn evaluate(&self, coeffs: &[f64]) -> Result<(Diffeo, Vec<Vector3<f64>>, f64)> {
        let candidate = self.candidate(coeffs)?;
        let acted = self.evaluator.act(candidate.image())?;
        let e = distance_sq(self.target.values(), &acted, self.target.grid());
        Ok((candidate, acted, e))
    }

    pub fn value(&self, coeffs: &[f64]) -> Result<f64> {
        self.evaluate(coeffs).map(|(_, _, e)| e)
    }

    /// Central-difference gradient at `c = 0`, one basis element at a time.
    pub fn gradient(&self, h: f64) -> Result<Vec<f64>> {
        let mut c = vec![0.0; self.basis.len()];
        (0..self.basis.len())
            .map(|k| {
                c[k] = h;
                let plus = self.value(&c)?;
                c[k] = -h;
                let minus = self.value(&c)?;
                c[k] = 0.0;
                Ok((plus - minus) / (2.0 * h))
            })
            .collect()
    }
}

fn flow_image(nodes: &[Vector3<f64>], basis: &TangentBasis, coeffs: &[f64]) -> Vec<Vector3<f64>> {
    basis
        .combine(coeffs)
        .iter()
        .zip(nodes)
        .map(|(b, s)| (s + b).normalize())
        .collect()
}

/// Polak-Ribiere direction (restarted when it is not a descent direction),
/// or the negative gradient when `conjugate` is off.
fn search_direction(
    grad: &[f64],
    prev: Option<&(Vec<f64>, Vec<f64>)>,
    conjugate: bool,
) -> Vec<f64> {
    let steepest = grad.iter().map(|g| -g);
    let Some((g_old, d_old)) = prev.filter(|_| conjugate) else {
        return steepest.collect();
    };
    let denom: f64 = g_old.iter().map(|g| g * g).sum();
    let num: f64 = grad.iter().zip(g_old).map(|(g, o)| g * (g - o)).sum();
    let beta = if denom > 0.0 {
        (num / denom).max(0.0)
    } else {
        0.0
    };
    let dir: Vec<f64> = steepest.zip(d_old).map(|(s, d)| s + beta * d).collect();
    let slope: f64 = dir.iter().zip(grad).map(|(d, g)| d * g).sum();
    if slope < 0.0 {
        dir
    } else {
        grad.iter().map(|g| -g).collect()
    }
}

/// Backtracking along `dir`: halve `step` until the energy strictly
/// decreases or the floor is reached. Steps that fold the map are rejected.
fn line_search(
    objective: &ReparamObjective,
    dir: &[f64],
    step: &mut f64,
    energy: f64,
    min_step: f64,
) -> Result<Option<(Diffeo, Vec<Vector3<f64>>, f64)>> {
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    while *step >= min_step {
        let coeffs: Vec<f64> = dir.iter().map(|d| d / norm * *step).collect();
        match objective.evaluate(&coeffs) {
            Ok((candidate, values, e)) if e < energy => return Ok(Some((candidate, values, e))),
            Ok(_) | Err(ShapeError::Orientation { .. }) => {}
            Err(e) => return Err(e),
        }
        *step *= 0.5;
    }
    Ok(None)
}

/// Outcome of [`optimize_reparam_from`].
#[derive(Debug, Clone)]
pub struct ReparamOutcome {
    pub diffeo: Diffeo,
    /// Squared SRNF distance after each accepted iterate, starting with the
    /// initial value.
    pub trace: Vec<f64>,
    /// The acted field `q2 * diffeo`.
    pub acted: SrnfField,
}

/// Minimize `||q1 - (q2 * gamma)||²` over `gamma` starting at the identity.
pub fn optimize_reparam(
    q1: &SrnfField,
    q2: &SrnfField,
    opts: &ReparamOptions,
) -> Result<(Diffeo, Vec<f64>)> {
    let start = Diffeo::identity(*q1.grid());
    let out = optimize_reparam_from(q1, q2, start, opts)?;
    Ok((out.diffeo, out.trace))
}

/// As [`optimize_reparam`], continuing from an existing map.
pub fn optimize_reparam_from(
    q1: &SrnfField,
    q2: &SrnfField,
    start: Diffeo,
    opts: &ReparamOptions,
) -> Result<ReparamOutcome> {
    let grid = *q1.grid();
    if *q2.grid() != grid || *start.grid() != grid {
        return Err(ShapeError::DimensionMismatch(
            "reparameterization inputs on different grids".into(),
        ));
    }
    let nodes = grid.node_points();
    let basis = TangentBasis::sample(&nodes, opts.max_degree);
    let full = ActionEvaluator::new(q2);

    let mut gamma = start;
    let mut acted = full.act(gamma.image())?;
    let mut energy = distance_sq(q1.values(), &acted, &grid);
    let mut trace = vec![energy];
    let mut step = opts.initial_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for iter in 0..opts.max_iters {
        if energy == 0.0 {
            break;
        }
        let objective = ReparamObjective::new(q1, &full, &gamma, &nodes, &basis);
        let grad = objective.gradient(opts.fd_step)?;
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }

        let steepest: Vec<f64> = grad.iter().map(|g| -g).collect();
        let dir = search_direction(&grad, prev.as_ref(), opts.conjugate);
        let mut accepted = line_search(&objective, &dir, &mut step, energy, opts.min_step)?;
        if accepted.is_none() && dir != steepest {
            // conjugate direction failed; retry along the plain gradient
            step = opts.initial_step;
            accepted = line_search(&objective, &steepest, &mut step, energy, opts.min_step)?;
        }
        let Some((candidate, values, e)) = accepted else {
            log::debug!("reparam: step floor reached at iteration {iter}");
            break;
        };
        prev = Some((grad, dir));
        let rel = (energy - e) / energy;
        gamma = candidate;
        acted = values;
        energy = e;
        trace.push(energy);
        step = (step * 2.0).min(opts.max_step);
        if rel < opts.tol_rel {
            break;
        }
    }

    Ok(ReparamOutcome {
        diffeo: gamma,
        trace,
        acted: SrnfField::from_parts(grid, acted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, SphericalGrid, Surface};
    use crate::registration::diffeo::random_diffeo;
    use crate::srnf::{srnf, srnf_action};

    fn bumpy(n: usize) -> SrnfField {
        let g = make_grid(n, n).unwrap();
        let f = Surface::from_fn(g, |t, p| {
            let s = SphericalGrid::embed(t, p);
            let r = 1.0 + 0.2 * s.x * s.y + 0.15 * s.z * s.z * s.x;
            Vector3::new(s.x, 0.7 * s.y, 0.5 * s.z) * r
        })
        .unwrap();
        srnf(&f)
    }

    #[test]
    fn self_registration_stays_at_identity() {
        let q = bumpy(24);
        let (g, trace) = optimize_reparam(&q, &q, &ReparamOptions::default()).unwrap();
        assert!(trace.len() <= 2);
        assert!(trace.last().unwrap().abs() < 1e-16);
        assert!(g.max_displacement() < 1e-12);
    }

    #[test]
    fn reduces_known_perturbation() {
        let q1 = bumpy(32);
        let g0 = random_diffeo(q1.grid(), 3, 0.2, 3).unwrap();
        let q2 = srnf_action(&q1, &g0).unwrap();
        let (_, trace) = optimize_reparam(&q1, &q2, &ReparamOptions::default()).unwrap();
        let (first, last) = (trace[0], *trace.last().unwrap());
        assert!(last <= 0.1 * first, "{first} -> {last}");
        for w in trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
