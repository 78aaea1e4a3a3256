//! Synthetic surfaces and cohorts with known ground truth.

mod cohort;
mod shapes;

pub use cohort::{
    gen_regression_cohort, Coefficient, CohortSpec, CovariateLaw, Dist, Noise, RegressionCohort,
    ResponseRule, TrueModel,
};
pub use shapes::{
    gen_pca_cohort, gen_surface, pca_coefficients, radial_direction, subject_rng, unit_flat,
    CoefficientLaw, ShapeFamily,
};
