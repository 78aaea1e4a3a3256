use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{same_size, PointCloud};
use crate::error::Result;
use crate::registration::procrustes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpOptions {
    pub max_iterations: usize,
    /// Stop once the RMS changes by less than this.
    pub tolerance: f64,
    /// Translate the moving centroid onto the fixed centroid first, when
    /// that does not increase the RMS.
    pub pre_center: bool,
}

impl Default for IcpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-8,
            pre_center: true,
        }
    }
}

/// `p -> rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        cloud.transformed(&self.rotation, &self.translation)
    }

    /// `self` after `first`.
    pub fn after(&self, first: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    pub aligned: PointCloud,
    /// Maps the input moving cloud onto `aligned`.
    pub transform: RigidTransform,
    /// Nearest-neighbor RMS before the first iteration and after each one.
    pub rms_trace: Vec<f64>,
}

struct Matcher {
    tree: ImmutableKdTree<f64, 3>,
    fixed: Vec<Vector3<f64>>,
}

impl Matcher {
    fn new(fixed: &PointCloud) -> Self {
        let pts: Vec<[f64; 3]> = fixed.points().iter().map(|p| [p.x, p.y, p.z]).collect();
        Self {
            tree: ImmutableKdTree::new_from_slice(&pts),
            fixed: fixed.points().to_vec(),
        }
    }

    /// Nearest fixed point for every moving point, and the resulting RMS.
    fn correspond(&self, moving: &PointCloud) -> (Vec<usize>, f64) {
        let mut sq = 0.0;
        let idx = moving
            .points()
            .iter()
            .map(|p| {
                let nn = self.tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]);
                sq += nn.distance;
                nn.item as usize
            })
            .collect();
        (idx, (sq / moving.len() as f64).sqrt())
    }
}

/// Least-squares rigid motion taking `src[i]` to `dst[i]`, with the
/// reflection case corrected.
fn kabsch(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> RigidTransform {
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let a = src.iter().zip(dst).fold(Matrix3::zeros(), |acc, (s, d)| {
        acc + (d - cd) * (s - cs).transpose()
    });
    let rotation = *procrustes(&a).matrix();
    RigidTransform {
        rotation,
        translation: cd - rotation * cs,
    }
}

/// Point-to-point ICP aligning `moving` onto `fixed`.
///
/// The clouds may differ in size; correspondences come from a k-d tree over
/// `fixed`.
pub fn icp_register(fixed: &PointCloud, moving: &PointCloud, opts: &IcpOptions) -> IcpResult {
    let matcher = Matcher::new(fixed);
    let mut transform = RigidTransform::identity();
    let mut current = moving.clone();
    let (mut idx, mut rms) = matcher.correspond(&current);

    if opts.pre_center {
        let shift = RigidTransform {
            rotation: Matrix3::identity(),
            translation: fixed.centroid() - moving.centroid(),
        };
        let shifted = shift.apply(moving);
        let (i2, r2) = matcher.correspond(&shifted);
        if r2 <= rms {
            transform = shift;
            current = shifted;
            idx = i2;
            rms = r2;
        }
    }

    let mut trace = vec![rms];
    for _ in 0..opts.max_iterations {
        let targets: Vec<Vector3<f64>> = idx.iter().map(|&i| matcher.fixed[i]).collect();
        let step = kabsch(current.points(), &targets);
        let next = step.apply(&current);
        let (i2, r2) = matcher.correspond(&next);
        // only rounding can make the re-matched RMS rise; keep the previous pose
        if r2 > rms {
            trace.push(rms);
            break;
        }
        transform = step.after(&transform);
        current = next;
        idx = i2;
        let change = rms - r2;
        rms = r2;
        trace.push(rms);
        if change < opts.tolerance {
            break;
        }
    }
    log::debug!("icp: {} iterations, rms {:.3e}", trace.len() - 1, rms);
    IcpResult {
        aligned: current,
        transform,
        rms_trace: trace,
    }
}

/// ICP-align every cloud onto `clouds[reference]`.
pub fn align_to_reference(
    clouds: &[PointCloud],
    reference: usize,
    opts: &IcpOptions,
) -> Result<Vec<IcpResult>> {
    let fixed = clouds.get(reference).ok_or_else(|| {
        crate::error::ShapeError::OutOfRange(format!(
            "reference {reference} of {} clouds",
            clouds.len()
        ))
    })?;
    clouds
        .iter()
        .map(|c| {
            same_size(fixed, c)?;
            Ok(icp_register(fixed, c, opts))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::Rotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(seed: u64, n: usize) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Vector3::new(
                        3.0 * rng.random::<f64>(),
                        2.0 * rng.random::<f64>() - 1.0,
                        0.5 * rng.random::<f64>(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_in_one_iteration() {
        let c = blob(1, 200);
        let out = icp_register(&c, &c, &IcpOptions::default());
        assert_eq!(out.rms_trace.len(), 2);
        assert!((out.transform.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(out.transform.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_small_rigid_motion() {
        let fixed = blob(2, 400);
        let r = *Rotation::from_euler_angles(0.08, -0.05, 0.1).matrix();
        let t = Vector3::new(0.05, -0.02, 0.03);
        let moving = fixed.transformed(&r, &t);
        let out = icp_register(&fixed, &moving, &IcpOptions::default());
        assert!(*out.rms_trace.last().unwrap() < 1e-6, "{:?}", out.rms_trace);
        assert!((out.transform.rotation - r.transpose()).norm() < 1e-4);
        for w in out.rms_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
