//! End-to-end synthetic experiments: the reparameterization simulation and
//! the elastic versus vertex-wise comparison.

use serde::{Deserialize, Serialize};

use crate::baseline::{
    align_to_reference, class_distances, classical_mds, nearest_neighbor_accuracy, vertex_pca,
    DistanceMatrix, IcpOptions, MdsResult, PointCloud,
};
use crate::error::{Result, ShapeError};
use crate::grid::{SphericalGrid, Surface};
use crate::registration::random_diffeo;
use crate::srnf::pullback;
use crate::statistics::{karcher_mean, shape_pca, KarcherOptions, VarianceConvention};
use crate::synthetic::{
    gen_pca_cohort, gen_surface, radial_direction, unit_flat, CoefficientLaw, ShapeFamily,
};

/// Radial harmonic deformation `x * amplitude * Y_{degree,index}(s) s`,
/// with `Y` scaled to unit RMS over the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Deformation {
    pub degree: usize,
    pub index: usize,
    /// Pointwise RMS displacement at `|x| = 1`.
    pub amplitude: f64,
}

impl Default for Deformation {
    fn default() -> Self {
        Self {
            degree: 2,
            index: 1,
            amplitude: 0.3,
        }
    }
}

impl Deformation {
    /// Unit flattened direction and the coefficient scale giving `amplitude`.
    fn direction(&self, grid: &SphericalGrid) -> Result<(Vec<f64>, f64)> {
        let v = unit_flat(&radial_direction(grid, self.degree, self.index)?)?;
        Ok((v, self.amplitude * (grid.len() as f64).sqrt()))
    }
}

/// Random reparameterizations applied to every subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    /// Approximate RMS displacement on the sphere, in radians.
    pub magnitude: f64,
    pub max_degree: usize,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            magnitude: 0.4,
            max_degree: 3,
        }
    }
}

impl Perturbation {
    fn apply(&self, surfaces: &[Surface], seed: u64) -> Result<Vec<Surface>> {
        surfaces
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let gamma = random_diffeo(
                    f.grid(),
                    diffeo_seed(seed, i),
                    self.magnitude,
                    self.max_degree,
                )?;
                pullback(f, &gamma)
            })
            .collect()
    }
}

fn diffeo_seed(seed: u64, subject: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(subject as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_u: usize,
    pub n_v: usize,
    pub n_subjects: usize,
    pub base: ShapeFamily,
    pub deformation: Deformation,
    pub perturbation: Perturbation,
    /// Template estimation and registration of the perturbed cohort.
    pub karcher: KarcherOptions,
    pub mds_dims: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_u: 32,
            n_v: 32,
            n_subjects: 40,
            base: ShapeFamily::BumpySphere {
                amplitude: 0.06,
                degree: 3,
            },
            deformation: Deformation::default(),
            perturbation: Perturbation {
                magnitude: 0.6,
                ..Default::default()
            },
            karcher: KarcherOptions {
                center: true,
                ..Default::default()
            },
            mds_dims: 2,
            seed: 7,
        }
    }
}

/// One stage of the simulation: a distance matrix, its embedding and the
/// leave-one-out nearest-neighbor accuracy.
#[derive(Debug, Clone)]
pub struct Stage {
    pub name: &'static str,
    pub distances: DistanceMatrix,
    pub mds: MdsResult,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub coefficients: Vec<f64>,
    pub labels: Vec<u8>,
    /// Registered cohort, after random reparameterization, and after elastic
    /// re-registration, in that order.
    pub stages: [Stage; 3],
}

impl SimulationResult {
    pub fn accuracies(&self) -> [f64; 3] {
        [
            self.stages[0].accuracy,
            self.stages[1].accuracy,
            self.stages[2].accuracy,
        ]
    }
}

/// L2 distances between surfaces sharing a parameterization.
pub fn l2_distance_matrix(surfaces: &[Surface]) -> Result<DistanceMatrix> {
    DistanceMatrix::from_pairs(surfaces.len(), |i, j| {
        Ok(surfaces[i].l2_distance(&surfaces[j]))
    })
}

fn stage(name: &'static str, surfaces: &[Surface], labels: &[u8], dims: usize) -> Result<Stage> {
    let distances = l2_distance_matrix(surfaces)?;
    let mds = classical_mds(&distances, dims)?;
    let accuracy = nearest_neighbor_accuracy(&distances, labels)?;
    log::info!("simulation stage {name}: 1-NN accuracy {accuracy:.3}");
    Ok(Stage {
        name,
        distances,
        mds,
        accuracy,
    })
}

/// Cohort `mu + x_i v` with a half/half sign split, compared as generated,
/// after random reparameterization, and after registration to a Karcher
/// template.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationResult> {
    if cfg.n_subjects < 4 {
        return Err(ShapeError::TooFewInputs {
            needed: 4,
            got: cfg.n_subjects,
        });
    }
    let grid = SphericalGrid::new(cfg.n_u, cfg.n_v)?;
    let mu = gen_surface(&cfg.base, &grid)?;
    let (v, scale) = cfg.deformation.direction(&grid)?;
    let law = CoefficientLaw {
        scale,
        n_positive: None,
    };
    let (cohort, x) = gen_pca_cohort(&mu, &v, &law, cfg.n_subjects, cfg.seed)?;
    let labels: Vec<u8> = x.iter().map(|&x| u8::from(x > 0.0)).collect();
    let coefficients = x.iter().map(|x| x / scale).collect();

    let registered = stage("registered", &cohort, &labels, cfg.mds_dims)?;
    let perturbed_set = cfg.perturbation.apply(&cohort, cfg.seed)?;
    let perturbed = stage("perturbed", &perturbed_set, &labels, cfg.mds_dims)?;
    let karcher = karcher_mean(&perturbed_set, &cfg.karcher)?;
    let reregistered = stage("reregistered", &karcher.registered, &labels, cfg.mds_dims)?;

    Ok(SimulationResult {
        coefficients,
        labels,
        stages: [registered, perturbed, reregistered],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub n_u: usize,
    pub n_v: usize,
    pub n_per_class: usize,
    pub base: ShapeFamily,
    /// Class 1 sits at `+1`, class 0 at `-1` along this deformation.
    pub class_gap: Deformation,
    /// Within-class spread: uniform coefficients on `[-1, 1]`.
    pub within_class: Deformation,
    pub perturbation: Perturbation,
    pub karcher: KarcherOptions,
    pub icp: IcpOptions,
    /// Leading directions at which cumulative variance is compared.
    pub n_directions: usize,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            n_u: 24,
            n_v: 24,
            n_per_class: 10,
            base: ShapeFamily::default(),
            class_gap: Deformation {
                degree: 2,
                index: 1,
                amplitude: 0.08,
            },
            within_class: Deformation {
                degree: 2,
                index: 3,
                amplitude: 0.05,
            },
            perturbation: Perturbation::default(),
            karcher: KarcherOptions {
                iterations: 1,
                center: true,
                ..Default::default()
            },
            icp: IcpOptions::default(),
            n_directions: 2,
            seed: 11,
        }
    }
}

/// Class separation and variance concentration of one pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub d_inter: f64,
    pub d_intra: f64,
    /// Cumulative singular-value fractions of the first directions.
    pub cumulative_variance: f64,
}

impl PipelineSummary {
    /// `(d_inter - d_intra) / d_intra`.
    pub fn margin(&self) -> f64 {
        (self.d_inter - self.d_intra) / self.d_intra
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareResult {
    pub elastic: PipelineSummary,
    pub vertex: PipelineSummary,
    pub labels: Vec<u8>,
    pub elastic_curve: Vec<f64>,
    pub vertex_curve: Vec<f64>,
}

fn summarize(
    clouds: &[PointCloud],
    labels: &[u8],
    curve: &[f64],
    d: usize,
) -> Result<PipelineSummary> {
    let (d_inter, d_intra) = class_distances(clouds, labels)?;
    let at = d.clamp(1, curve.len()) - 1;
    Ok(PipelineSummary {
        d_inter,
        d_intra,
        cumulative_variance: curve[at],
    })
}

/// Two-class cohort with parameterization noise, analysed by elastic
/// registration to a Karcher mean and by ICP on raw grid points.
pub fn run_compare(cfg: &CompareConfig) -> Result<CompareResult> {
    if cfg.n_per_class < 2 {
        return Err(ShapeError::TooFewInputs {
            needed: 2,
            got: cfg.n_per_class,
        });
    }
    let grid = SphericalGrid::new(cfg.n_u, cfg.n_v)?;
    let mu = gen_surface(&cfg.base, &grid)?;
    let (gap, gap_scale) = cfg.class_gap.direction(&grid)?;
    let (spread, spread_scale) = cfg.within_class.direction(&grid)?;
    let n = 2 * cfg.n_per_class;
    // two-sided law: first half positive, second half negative
    let law = CoefficientLaw {
        scale: spread_scale,
        n_positive: Some(cfg.n_per_class / 2),
    };
    let base = mu.to_flat();
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= cfg.n_per_class)).collect();
    let mut cohort = Vec::with_capacity(n);
    for class in 0..2u8 {
        let sign = if class == 1 { 1.0 } else { -1.0 };
        let centre: Vec<f64> = base
            .iter()
            .zip(&gap)
            .map(|(m, g)| m + sign * gap_scale * g)
            .collect();
        let centre = Surface::from_flat(grid, &centre)?;
        let (members, _) = gen_pca_cohort(
            &centre,
            &spread,
            &law,
            cfg.n_per_class,
            cfg.seed.wrapping_add(u64::from(class)),
        )?;
        cohort.extend(members);
    }
    let observed = cfg.perturbation.apply(&cohort, cfg.seed)?;

    let karcher = karcher_mean(&observed, &cfg.karcher)?;
    let elastic_model = shape_pca(&karcher.registered, &karcher.mean)?;
    let elastic_curve = elastic_model
        .basis()
        .cumulative_variance(VarianceConvention::Singular);
    let elastic_clouds: Vec<PointCloud> = karcher
        .registered
        .iter()
        .map(PointCloud::from_surface)
        .collect();
    let elastic = summarize(&elastic_clouds, &labels, &elastic_curve, cfg.n_directions)?;

    let raw: Vec<PointCloud> = observed.iter().map(PointCloud::from_surface).collect();
    let aligned: Vec<PointCloud> = align_to_reference(&raw, 0, &cfg.icp)?
        .into_iter()
        .map(|r| r.aligned)
        .collect();
    let vertex_curve = vertex_pca(&aligned)?.cumulative_variance(VarianceConvention::Singular);
    let vertex = summarize(&aligned, &labels, &vertex_curve, cfg.n_directions)?;

    log::info!(
        "compare: elastic inter {:.4} intra {:.4}; vertex inter {:.4} intra {:.4}",
        elastic.d_inter,
        elastic.d_intra,
        vertex.d_inter,
        vertex.d_intra
    );
    Ok(CompareResult {
        elastic,
        vertex,
        labels,
        elastic_curve,
        vertex_curve,
    })
}
