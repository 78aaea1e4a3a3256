use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::shapes::{gen_surface, radial_direction, subject_rng, ShapeFamily};
use crate::error::{Result, ShapeError};
use crate::grid::{SphericalGrid, Surface};
use crate::regression::{CovariateTable, Response, Strictness, Subject, Term};
use crate::statistics::{PcScores, PcaBasis, ShapeModel};

/// Scalar sampling law for a covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Dist {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Dist {
    fn check(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Dist::Constant { value } => value.is_finite(),
            Dist::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Dist::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ShapeError::OutOfRange(format!(
                "invalid distribution for {name}: {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Dist::Constant { value } => value,
            Dist::Uniform { low, high } => Uniform::new(low, high).expect("checked").sample(rng),
            Dist::Normal { mean, sd } => Normal::new(mean, sd).expect("checked").sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateLaw {
    pub age: Dist,
    pub bdi: Dist,
    pub icv: Dist,
    /// Used for whichever of pss/ctqtot is not the modeled response.
    pub pss: Dist,
    pub ctqtot: Dist,
}

impl Default for CovariateLaw {
    fn default() -> Self {
        Self {
            age: Dist::Uniform {
                low: 18.0,
                high: 65.0,
            },
            bdi: Dist::Uniform {
                low: 0.0,
                high: 40.0,
            },
            icv: Dist::Normal {
                mean: 1500.0,
                sd: 120.0,
            },
            pss: Dist::Uniform {
                low: 0.0,
                high: 42.0,
            },
            ctqtot: Dist::Uniform {
                low: 25.0,
                high: 100.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// Residual standard deviation.
    Sd(f64),
    /// Ratio of the sample standard deviation of the signal to the noise
    /// standard deviation.
    Snr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    #[serde(flatten)]
    pub term: Term,
    pub value: f64,
}

/// `response = intercept + sum(value * term) + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseRule {
    pub response: Response,
    pub intercept: f64,
    pub coefficients: Vec<Coefficient>,
    pub noise: Noise,
}

impl Default for ResponseRule {
    fn default() -> Self {
        Self {
            response: Response::Pss,
            intercept: 5.0,
            coefficients: vec![
                Coefficient {
                    term: Term::Age,
                    value: 0.1,
                },
                Coefficient {
                    term: Term::Bdi,
                    value: 0.3,
                },
                Coefficient {
                    term: Term::Ps { structure: 0, k: 2 },
                    value: 2.0,
                },
            ],
            noise: Noise::Snr(5.0),
        }
    }
}

/// Seeded cohort with known shape modes, covariates and response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub n_u: usize,
    pub n_v: usize,
    /// One base shape per scored structure.
    pub structures: Vec<ShapeFamily>,
    /// Radial harmonic modes per structure, taken in degree order from
    /// degree 1 and orthonormalized. At most 24 (degrees 1 to 4).
    pub n_modes: usize,
    /// Pointwise RMS displacement of a one-sd step along the first mode.
    pub mode_rms: f64,
    /// Ratio between successive mode standard deviations.
    pub mode_decay: f64,
    pub covariates: CovariateLaw,
    pub response: ResponseRule,
    /// Subjects with response at or above this value get label 1.
    pub label_threshold: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_subjects: 120,
            n_u: 16,
            n_v: 16,
            structures: vec![ShapeFamily::default()],
            n_modes: 15,
            mode_rms: 0.05,
            mode_decay: 0.85,
            covariates: CovariateLaw::default(),
            response: ResponseRule::default(),
            label_threshold: 20.0,
            seed: 1,
        }
    }
}

/// Ground truth behind a generated cohort.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueModel {
    pub response: Response,
    pub intercept: f64,
    pub coefficients: Vec<Coefficient>,
    pub noise_sd: f64,
    /// Standard deviation of each mode's score.
    pub mode_sd: Vec<f64>,
}

impl TrueModel {
    /// Terms with nonzero coefficients, intercept first.
    pub fn support(&self) -> Vec<Term> {
        let mut out = vec![Term::Intercept];
        out.extend(
            self.coefficients
                .iter()
                .filter(|c| c.value != 0.0)
                .map(|c| c.term),
        );
        out
    }
}

#[derive(Debug, Clone)]
pub struct RegressionCohort {
    /// `surfaces[s][i]` is subject `i`'s surface for structure `s`.
    pub surfaces: Vec<Vec<Surface>>,
    pub covariates: CovariateTable,
    /// True principal scores in the layout expected by the regression code.
    pub scores: Vec<Vec<PcScores>>,
    /// The shape model each structure was drawn from.
    pub models: Vec<ShapeModel>,
    pub truth: TrueModel,
}

const MAX_MODES: usize = 24;

fn mode_basis(grid: &SphericalGrid, n_modes: usize) -> Result<DMatrix<f64>> {
    let mut cols = Vec::with_capacity(n_modes);
    'outer: for degree in 1..=4 {
        for index in 0..=2 * degree {
            if cols.len() == n_modes {
                break 'outer;
            }
            let field = radial_direction(grid, degree, index)?;
            let flat: Vec<f64> = field.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
            cols.push(DVector::from_vec(flat));
        }
    }
    let m = DMatrix::from_columns(&cols);
    let mut q = m.qr().q();
    // fix the arbitrary QR signs so each mode correlates positively with its harmonic
    for (c, col) in cols.iter().enumerate() {
        if q.column(c).dot(col) < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    Ok(q)
}

/// Generate a regression cohort; the same spec always yields identical output.
pub fn gen_regression_cohort(spec: &CohortSpec) -> Result<RegressionCohort> {
    if spec.n_modes == 0 || spec.n_modes > MAX_MODES {
        return Err(ShapeError::OutOfRange(format!(
            "n_modes = {} (expected 1 to {MAX_MODES})",
            spec.n_modes
        )));
    }
    if spec.n_subjects < 2 {
        return Err(ShapeError::TooFewInputs {
            needed: 2,
            got: spec.n_subjects,
        });
    }
    if spec.structures.is_empty() {
        return Err(ShapeError::OutOfRange(
            "at least one structure is required".into(),
        ));
    }
    if !(spec.mode_rms.is_finite()
        && spec.mode_rms >= 0.0
        && spec.mode_decay.is_finite()
        && spec.mode_decay > 0.0)
    {
        return Err(ShapeError::OutOfRange(
            "mode_rms and mode_decay must be finite, decay positive".into(),
        ));
    }
    let law = &spec.covariates;
    for (name, d) in [
        ("age", law.age),
        ("bdi", law.bdi),
        ("icv", law.icv),
        ("pss", law.pss),
        ("ctqtot", law.ctqtot),
    ] {
        d.check(name)?;
    }
    let rule = &spec.response;
    for c in &rule.coefficients {
        if let Some((s, k)) = c.term.ps() {
            if s >= spec.structures.len() || k == 0 || k > spec.n_modes {
                return Err(ShapeError::OutOfRange(format!(
                    "response term {} has no matching mode",
                    c.term
                )));
            }
        }
        if !c.value.is_finite() {
            return Err(ShapeError::NonFinite(0));
        }
    }
    let noise_ok = match rule.noise {
        Noise::Sd(s) => s.is_finite() && s >= 0.0,
        Noise::Snr(r) => r.is_finite() && r > 0.0,
    };
    if !noise_ok {
        return Err(ShapeError::OutOfRange(format!(
            "invalid noise setting {:?}",
            rule.noise
        )));
    }

    let grid = SphericalGrid::new(spec.n_u, spec.n_v)?;
    let q = mode_basis(&grid, spec.n_modes)?;
    let unit = (grid.len() as f64).sqrt();
    let mode_sd: Vec<f64> = (0..spec.n_modes)
        .map(|k| spec.mode_rms * unit * spec.mode_decay.powi(k as i32))
        .collect();
    let n = spec.n_subjects;
    let n_struct = spec.structures.len();

    // per-subject draws from that subject's own stream
    let mut subjects = Vec::with_capacity(n);
    let mut raw_scores: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(n); n_struct];
    let mut eps = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = subject_rng(spec.seed, i);
        let s = Subject {
            id: format!("sub{:03}", i + 1),
            age: law.age.sample(&mut rng),
            bdi: law.bdi.sample(&mut rng),
            icv: law.icv.sample(&mut rng),
            pss: law.pss.sample(&mut rng),
            ctqtot: law.ctqtot.sample(&mut rng),
            label: 0,
        };
        for per in raw_scores.iter_mut() {
            per.push(
                mode_sd
                    .iter()
                    .map(|sd| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
        }
        eps.push(rng.sample::<f64, _>(StandardNormal));
        subjects.push(s);
    }

    let signal: Vec<f64> = (0..n)
        .map(|i| {
            let s = &subjects[i];
            rule.intercept
                + rule
                    .coefficients
                    .iter()
                    .map(|c| {
                        let score = |st: usize, k: usize| raw_scores[st][i][k - 1];
                        let x = match c.term {
                            Term::Intercept => 1.0,
                            Term::Age => s.age,
                            Term::Bdi => s.bdi,
                            Term::Icv => s.icv,
                            Term::Ps { structure, k } => score(structure, k),
                            Term::AgeXPs { structure, k } => s.age * score(structure, k),
                            Term::BdiXPs { structure, k } => s.bdi * score(structure, k),
                        };
                        c.value * x
                    })
                    .sum::<f64>()
        })
        .collect();
    let noise_sd = match rule.noise {
        Noise::Sd(s) => s,
        Noise::Snr(r) => {
            let m = signal.iter().sum::<f64>() / n as f64;
            let var = signal.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt() / r
        }
    };
    for (i, s) in subjects.iter_mut().enumerate() {
        let y = signal[i] + noise_sd * eps[i];
        match rule.response {
            Response::Pss => s.pss = y,
            Response::Ctqtot => s.ctqtot = y,
        }
        s.label = u8::from(y >= spec.label_threshold);
    }
    let covariates = CovariateTable::new(subjects, Strictness::Lenient)?;

    let mut surfaces = Vec::with_capacity(n_struct);
    let mut models = Vec::with_capacity(n_struct);
    for (st, family) in spec.structures.iter().enumerate() {
        let mean = DVector::from_vec(gen_surface(family, &grid)?.to_flat());
        let per = raw_scores[st]
            .iter()
            .map(|z| {
                let flat = &mean + &q * DVector::from_column_slice(z);
                Surface::from_flat(grid, flat.as_slice())
            })
            .collect::<Result<Vec<_>>>()?;
        let singulars = mode_sd
            .iter()
            .map(|sd| sd * ((n - 1) as f64).sqrt())
            .collect();
        let basis = PcaBasis::from_parts(mean, q.clone(), singulars, n)?;
        models.push(ShapeModel::from_basis(grid, basis)?);
        surfaces.push(per);
    }
    let scores = raw_scores
        .into_iter()
        .map(|per| per.into_iter().map(PcScores).collect())
        .collect();

    Ok(RegressionCohort {
        surfaces,
        covariates,
        scores,
        models,
        truth: TrueModel {
            response: rule.response,
            intercept: rule.intercept,
            coefficients: rule.coefficients.clone(),
            noise_sd,
            mode_sd,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{design_matrix, ols_fit, ModelSpec};
    use crate::statistics::pc_scores;

    fn small() -> CohortSpec {
        CohortSpec {
            n_subjects: 30,
            n_u: 10,
            n_v: 8,
            n_modes: 6,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_regression_cohort(&small()).unwrap();
        let b = gen_regression_cohort(&small()).unwrap();
        assert_eq!(a.covariates, b.covariates);
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.surfaces, b.surfaces);
        let c = gen_regression_cohort(&CohortSpec { seed: 2, ..small() }).unwrap();
        assert_ne!(a.scores, c.scores);
    }

    #[test]
    fn scores_are_recoverable_from_surfaces() {
        let c = gen_regression_cohort(&small()).unwrap();
        let model = &c.models[0];
        for (f, z) in c.surfaces[0].iter().zip(&c.scores[0]) {
            let back = pc_scores(f, model, 6).unwrap();
            for (a, b) in back.as_slice().iter().zip(z.as_slice()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_true_model_fits_exactly() {
        let mut spec = small();
        spec.response.noise = Noise::Sd(0.0);
        let c = gen_regression_cohort(&spec).unwrap();
        let model = ModelSpec::new(Response::Pss, c.truth.support(), 6, 5).unwrap();
        let x = design_matrix(&model, &c.covariates, &c.scores, false).unwrap();
        let y = nalgebra::DVector::from_vec(c.covariates.response(Response::Pss));
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = small();
        spec.response.coefficients.push(Coefficient {
            term: Term::Ps { structure: 0, k: 9 },
            value: 1.0,
        });
        assert!(gen_regression_cohort(&spec).is_err());
        let spec = CohortSpec {
            n_modes: 30,
            ..small()
        };
        assert!(gen_regression_cohort(&spec).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = CohortSpec::default();
        let text = serde_json::to_string(&spec).unwrap();
        let back: CohortSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let partial: CohortSpec = serde_json::from_str(r#"{"n_subjects": 50, "seed": 9}"#).unwrap();
        assert_eq!(partial.n_subjects, 50);
    }
}
