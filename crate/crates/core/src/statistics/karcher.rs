use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_surface, same_grid};
use crate::error::{Result, ShapeError};
use crate::grid::Surface;
use crate::registration::{mean_diffeo, register, Diffeo, RegistrationOptions};
use crate::srnf::pullback;

/// Which input seeds the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMean {
    Index(usize),
    /// Uniformly random input chosen by the seed.
    Random(u64),
}

impl Default for InitialMean {
    fn default() -> Self {
        InitialMean::Index(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KarcherOptions {
    /// Register-then-average iterations before the final registration pass.
    pub iterations: usize,
    pub init: InitialMean,
    pub registration: RegistrationOptions,
    /// After each update, reparameterize the mean by the inverse of the
    /// average registration map, so the template does not inherit the
    /// parameterization of the initial surface.
    pub center: bool,
}

impl Default for KarcherOptions {
    fn default() -> Self {
        Self {
            iterations: 5,
            init: InitialMean::default(),
            registration: RegistrationOptions::default(),
            center: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KarcherResult {
    pub mean: Surface,
    /// Inputs registered to `mean` by the final pass.
    pub registered: Vec<Surface>,
    /// `(1/n) sum_i d_s(mu, f_i)^2` measured at each iteration's registration
    /// pass, the last entry belonging to the final pass.
    pub variance_trace: Vec<f64>,
    /// Final shape distances from `mean` to each input.
    pub distances: Vec<f64>,
}

fn register_all(
    mu: &Surface,
    surfaces: &[Surface],
    opts: &RegistrationOptions,
) -> Result<(Vec<Surface>, Vec<f64>, Vec<Diffeo>)> {
    let results = surfaces
        .par_iter()
        .map(|f| register(mu, f, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut registered = Vec::with_capacity(results.len());
    let mut distances = Vec::with_capacity(results.len());
    let mut maps = Vec::with_capacity(results.len());
    for r in results {
        registered.push(r.aligned);
        distances.push(r.distance);
        maps.push(r.reparam);
    }
    Ok((registered, distances, maps))
}

/// `mu o mean(maps)^-1`; leaves `mu` alone if the average map cannot be
/// inverted cleanly.
fn centered(mu: Surface, maps: &[Diffeo]) -> Result<Surface> {
    match mean_diffeo(maps).and_then(|m| m.inverse()) {
        Ok(inv) => pullback(&mu, &inv),
        Err(e) => {
            log::warn!("karcher: skipping parameterization centering ({e})");
            Ok(mu)
        }
    }
}

fn variance(distances: &[f64]) -> f64 {
    distances.iter().map(|d| d * d).sum::<f64>() / distances.len() as f64
}

/// Extrinsic Karcher mean: alternate registering every surface to the
/// current mean with replacing the mean by the pointwise average of the
/// registered surfaces.
pub fn karcher_mean(surfaces: &[Surface], opts: &KarcherOptions) -> Result<KarcherResult> {
    let first = surfaces
        .first()
        .ok_or(ShapeError::TooFewInputs { needed: 1, got: 0 })?;
    for s in surfaces {
        same_grid(first, s)?;
    }
    let start = match opts.init {
        InitialMean::Index(i) if i < surfaces.len() => i,
        InitialMean::Index(i) => {
            return Err(ShapeError::OutOfRange(format!(
                "initial mean index {i} with {} surfaces",
                surfaces.len()
            )))
        }
        InitialMean::Random(seed) => {
            ChaCha8Rng::seed_from_u64(seed).random_range(0..surfaces.len())
        }
    };

    let mut mu = surfaces[start].clone();
    let mut variance_trace = Vec::with_capacity(opts.iterations + 1);
    for j in 0..opts.iterations {
        let (registered, dist, maps) = register_all(&mu, surfaces, &opts.registration)?;
        let v = variance(&dist);
        log::info!("karcher iteration {}: variance {v:.6e}", j + 1);
        variance_trace.push(v);
        mu = mean_surface(&registered)?;
        if opts.center {
            mu = centered(mu, &maps)?;
        }
    }
    let (registered, distances, _) = register_all(&mu, surfaces, &opts.registration)?;
    let v = variance(&distances);
    log::info!("karcher final pass: variance {v:.6e}");
    variance_trace.push(v);
    Ok(KarcherResult {
        mean: mu,
        registered,
        variance_trace,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, SphericalGrid};
    use nalgebra::Vector3;

    fn blob(n: usize) -> Surface {
        let g = make_grid(n, n).unwrap();
        Surface::from_fn(g, |t, p| {
            let s = SphericalGrid::embed(t, p);
            Vector3::new(s.x, 0.7 * s.y, 0.5 * s.z) * (1.0 + 0.1 * s.x * s.y)
        })
        .unwrap()
    }

    #[test]
    fn identical_inputs_are_a_fixed_point() {
        let f = blob(16);
        let r = karcher_mean(
            &[f.clone(), f.clone(), f.clone()],
            &KarcherOptions::default(),
        )
        .unwrap();
        for (a, b) in r.mean.points().iter().zip(f.points()) {
            assert!((a - b).norm() < 1e-8);
        }
        assert_eq!(r.variance_trace.len(), 6);
        assert!(r.variance_trace.iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn bad_inputs() {
        assert!(karcher_mean(&[], &KarcherOptions::default()).is_err());
        let opts = KarcherOptions {
            init: InitialMean::Index(3),
            ..Default::default()
        };
        assert!(karcher_mean(&[blob(8)], &opts).is_err());
    }
}
