//! Linear models relating principal scores and clinical covariates:
//! design matrices with shape-by-covariate interactions, least squares with
//! inference, bidirectional stepwise selection and the ten-model suite.

mod covariates;
mod ols;
mod stepwise;
mod suite;

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::statistics::PcScores;

pub use covariates::{CovariateTable, Response, Strictness, Subject};
pub use ols::{adjusted_r_squared, ols_fit, ols_fit_named, t_two_sided_p, RegressionFit};
pub use stepwise::{stepwise_bidirectional, Criterion, StepwiseResult};
pub use suite::{
    run_model_suite, write_suite_csv, write_suite_json, ModelReport, SuiteOptions, TermReport,
};

/// A design-matrix column.
///
/// `structure` indexes the scored surface type (0-based); `k` is the
/// 1-based principal score index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum Term {
    Intercept,
    Age,
    Bdi,
    Icv,
    Ps { structure: usize, k: usize },
    AgeXPs { structure: usize, k: usize },
    BdiXPs { structure: usize, k: usize },
}

impl Term {
    /// Principal-score reference `(structure, k)` of a shape term.
    pub fn ps(self) -> Option<(usize, usize)> {
        match self {
            Term::Ps { structure, k }
            | Term::AgeXPs { structure, k }
            | Term::BdiXPs { structure, k } => Some((structure, k)),
            _ => None,
        }
    }

    pub fn is_interaction(self) -> bool {
        matches!(self, Term::AgeXPs { .. } | Term::BdiXPs { .. })
    }

    /// Covariate terms are the fixed part of every model.
    pub fn is_covariate(self) -> bool {
        matches!(self, Term::Intercept | Term::Age | Term::Bdi | Term::Icv)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Intercept => write!(f, "intercept"),
            Term::Age => write!(f, "age"),
            Term::Bdi => write!(f, "bdi"),
            Term::Icv => write!(f, "icv"),
            Term::Ps { structure, k } => write!(f, "s{}.ps{k}", structure + 1),
            Term::AgeXPs { structure, k } => write!(f, "age:s{}.ps{k}", structure + 1),
            Term::BdiXPs { structure, k } => write!(f, "bdi:s{}.ps{k}", structure + 1),
        }
    }
}

/// Response plus an ordered, duplicate-free list of terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub response: Response,
    terms: Vec<Term>,
    pub n_ps: usize,
    pub n_interact_ps: usize,
}

impl ModelSpec {
    pub fn new(
        response: Response,
        terms: Vec<Term>,
        n_ps: usize,
        n_interact_ps: usize,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &terms {
            if !seen.insert(*t) {
                return Err(ShapeError::DuplicateTerm(t.to_string()));
            }
            if let Some((_, k)) = t.ps() {
                let limit = if t.is_interaction() {
                    n_interact_ps
                } else {
                    n_ps
                };
                if k == 0 || k > limit {
                    return Err(ShapeError::OutOfRange(format!(
                        "term {t} uses score {k}, allowed 1..={limit}"
                    )));
                }
            }
        }
        Ok(Self {
            response,
            terms,
            n_ps,
            n_interact_ps,
        })
    }

    /// Full term list of model `id` (1 to 10) over `n_structures` scored
    /// surface types.
    ///
    /// | id | predictors | response |
    /// |----|------------|----------|
    /// | 1, 5 | age + bdi + PS + interactions | pss, ctqtot |
    /// | 2, 6 | age + bdi + PS | pss, ctqtot |
    /// | 3, 7 | age + bdi | pss, ctqtot |
    /// | 4, 8 | PS | pss, ctqtot |
    /// | 9, 10 | age + bdi + icv + PS + interactions | pss, ctqtot |
    pub fn table_model(
        id: usize,
        n_structures: usize,
        n_ps: usize,
        n_interact_ps: usize,
    ) -> Result<Self> {
        let (response, covariates, ps, interactions) = match id {
            1 => (Response::Pss, vec![Term::Age, Term::Bdi], true, true),
            2 => (Response::Pss, vec![Term::Age, Term::Bdi], true, false),
            3 => (Response::Pss, vec![Term::Age, Term::Bdi], false, false),
            4 => (Response::Pss, vec![], true, false),
            5 => (Response::Ctqtot, vec![Term::Age, Term::Bdi], true, true),
            6 => (Response::Ctqtot, vec![Term::Age, Term::Bdi], true, false),
            7 => (Response::Ctqtot, vec![Term::Age, Term::Bdi], false, false),
            8 => (Response::Ctqtot, vec![], true, false),
            9 => (
                Response::Pss,
                vec![Term::Age, Term::Bdi, Term::Icv],
                true,
                true,
            ),
            10 => (
                Response::Ctqtot,
                vec![Term::Age, Term::Bdi, Term::Icv],
                true,
                true,
            ),
            _ => {
                return Err(ShapeError::OutOfRange(format!(
                    "model id {id} (expected 1 to 10)"
                )))
            }
        };
        let mut terms = vec![Term::Intercept];
        terms.extend(covariates);
        if ps {
            for structure in 0..n_structures {
                terms.extend((1..=n_ps).map(|k| Term::Ps { structure, k }));
            }
        }
        if interactions {
            for structure in 0..n_structures {
                terms.extend((1..=n_interact_ps).map(|k| Term::AgeXPs { structure, k }));
                terms.extend((1..=n_interact_ps).map(|k| Term::BdiXPs { structure, k }));
            }
        }
        Self::new(response, terms, n_ps, n_interact_ps)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Covariate terms, never removed by stepwise selection.
    pub fn forced(&self) -> Vec<Term> {
        self.terms
            .iter()
            .copied()
            .filter(|t| t.is_covariate())
            .collect()
    }

    /// Same response and limits, different terms.
    pub fn with_terms(&self, terms: Vec<Term>) -> Result<Self> {
        Self::new(self.response, terms, self.n_ps, self.n_interact_ps)
    }
}

/// Principal scores of every subject for one scored structure.
pub type StructureScores = [PcScores];

/// Design matrix with one row per subject and one column per term.
///
/// Interaction columns are products of the raw covariate and raw score. With
/// `standardize`, every non-intercept column is then centered and scaled to
/// unit sample standard deviation.
pub fn design_matrix(
    spec: &ModelSpec,
    cov: &CovariateTable,
    scores: &[Vec<PcScores>],
    standardize: bool,
) -> Result<DMatrix<f64>> {
    let n = cov.len();
    for (s, set) in scores.iter().enumerate() {
        if set.len() != n {
            return Err(ShapeError::DimensionMismatch(format!(
                "structure {} has scores for {} subjects, covariates for {n}",
                s + 1,
                set.len()
            )));
        }
    }
    let (age, bdi, icv) = (cov.age(), cov.bdi(), cov.icv());
    let score = |structure: usize, k: usize, row: usize| -> Result<f64> {
        let set = scores.get(structure).ok_or_else(|| {
            ShapeError::DimensionMismatch(format!("no scores for structure {}", structure + 1))
        })?;
        set[row].as_slice().get(k - 1).copied().ok_or_else(|| {
            ShapeError::DimensionMismatch(format!(
                "structure {} subject {row} has {} scores, need {k}",
                structure + 1,
                set[row].len()
            ))
        })
    };

    let mut x = DMatrix::zeros(n, spec.terms.len());
    for (c, term) in spec.terms.iter().enumerate() {
        for r in 0..n {
            x[(r, c)] = match *term {
                Term::Intercept => 1.0,
                Term::Age => age[r],
                Term::Bdi => bdi[r],
                Term::Icv => icv[r],
                Term::Ps { structure, k } => score(structure, k, r)?,
                Term::AgeXPs { structure, k } => age[r] * score(structure, k, r)?,
                Term::BdiXPs { structure, k } => bdi[r] * score(structure, k, r)?,
            };
        }
        if standardize && *term != Term::Intercept && n > 1 {
            let mut col = x.column_mut(c);
            let mean = col.mean();
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            if sd > 0.0 {
                col.apply(|v| *v = (*v - mean) / sd);
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize) -> CovariateTable {
        let rows = (0..n)
            .map(|i| Subject {
                id: format!("s{i}"),
                age: 20.0 + i as f64,
                bdi: (i % 7) as f64,
                icv: 1400.0 + 10.0 * i as f64,
                pss: (i % 11) as f64,
                ctqtot: 30.0 + i as f64,
                label: (i % 2) as u8,
            })
            .collect();
        CovariateTable::new(rows, Strictness::Strict).unwrap()
    }

    fn scores(n_structures: usize, n: usize, d: usize) -> Vec<Vec<PcScores>> {
        (0..n_structures)
            .map(|s| {
                (0..n)
                    .map(|i| {
                        PcScores(
                            (0..d)
                                .map(|k| (s * 100 + i * 10 + k) as f64 * 0.01)
                                .collect(),
                        )
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn intercept_and_age() {
        let spec = ModelSpec::new(Response::Pss, vec![Term::Intercept, Term::Age], 15, 5).unwrap();
        let x = design_matrix(&spec, &table(3), &[], false).unwrap();
        assert_eq!(x.shape(), (3, 2));
        assert!(x.column(0).iter().all(|&v| v == 1.0));
        assert_eq!(x[(2, 1)], 22.0);
    }

    #[test]
    fn model_one_column_count() {
        let spec = ModelSpec::table_model(1, 3, 15, 5).unwrap();
        assert_eq!(spec.terms().len(), 78);
        assert_eq!(
            ModelSpec::table_model(9, 3, 15, 5).unwrap().terms().len(),
            79
        );
        assert_eq!(
            ModelSpec::table_model(4, 3, 15, 5).unwrap().terms().len(),
            46
        );
        assert_eq!(
            ModelSpec::table_model(7, 3, 15, 5).unwrap().terms().len(),
            3
        );
        assert!(ModelSpec::table_model(11, 3, 15, 5).is_err());
    }

    #[test]
    fn interaction_is_elementwise_product() {
        let spec = ModelSpec::new(
            Response::Pss,
            vec![
                Term::Age,
                Term::Ps { structure: 1, k: 1 },
                Term::AgeXPs { structure: 1, k: 1 },
            ],
            15,
            5,
        )
        .unwrap();
        let x = design_matrix(&spec, &table(6), &scores(2, 6, 15), false).unwrap();
        for r in 0..6 {
            assert_eq!(x[(r, 2)], x[(r, 0)] * x[(r, 1)]);
        }
    }

    #[test]
    fn spec_validation() {
        let dup = ModelSpec::new(Response::Pss, vec![Term::Age, Term::Age], 15, 5);
        assert!(matches!(dup, Err(ShapeError::DuplicateTerm(_))));
        let wide = ModelSpec::new(
            Response::Pss,
            vec![Term::BdiXPs { structure: 0, k: 6 }],
            15,
            5,
        );
        assert!(matches!(wide, Err(ShapeError::OutOfRange(_))));
    }

    #[test]
    fn dimension_checks() {
        let spec = ModelSpec::table_model(2, 2, 15, 5).unwrap();
        assert!(design_matrix(&spec, &table(6), &scores(2, 5, 15), false).is_err());
        assert!(design_matrix(&spec, &table(6), &scores(2, 6, 10), false).is_err());
        assert!(design_matrix(&spec, &table(6), &scores(1, 6, 15), false).is_err());
    }

    #[test]
    fn standardized_columns() {
        let spec = ModelSpec::table_model(2, 1, 3, 0).unwrap();
        let x = design_matrix(&spec, &table(9), &scores(1, 9, 3), true).unwrap();
        for c in 1..x.ncols() {
            let col = x.column(c);
            assert!(col.mean().abs() < 1e-12);
            let var = col.iter().map(|v| v * v).sum::<f64>() / 8.0;
            assert!((var - 1.0).abs() < 1e-12);
        }
    }
}
