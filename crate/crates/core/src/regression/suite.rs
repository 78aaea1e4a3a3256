use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stepwise::{stepwise_bidirectional, Criterion};
use super::{CovariateTable, ModelSpec, Response};
use crate::error::{Result, ShapeError};
use crate::statistics::PcScores;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    /// Principal scores per structure offered to the models.
    pub n_ps: usize,
    /// Leading scores that also enter age and BDI interactions.
    pub n_interact_ps: usize,
    pub criterion: Criterion,
    /// Significance level for the reported term list.
    pub alpha: f64,
    /// Model ids to run, from 1 to 10.
    pub models: Vec<usize>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            n_ps: 15,
            n_interact_ps: 5,
            criterion: Criterion::Aic,
            alpha: 0.05,
            models: (1..=10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermReport {
    pub term: String,
    pub coefficient: f64,
    pub sign: i8,
    pub p_value: f64,
    pub significant: bool,
}

/// One row of the model comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: usize,
    pub response: Response,
    pub predictors: &'static str,
    pub n: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// Every term of the selected model.
    pub terms: Vec<TermReport>,
}

impl ModelReport {
    pub fn significant(&self) -> impl Iterator<Item = &TermReport> {
        self.terms.iter().filter(|t| t.significant)
    }
}

fn predictors(id: usize) -> &'static str {
    match id {
        1 | 5 => "age + bdi + PS + interactions",
        2 | 6 => "age + bdi + PS",
        3 | 7 => "age + bdi",
        4 | 8 => "PS",
        _ => "age + bdi + icv + PS + interactions",
    }
}

/// Run the selected models with stepwise selection over their shape terms.
///
/// `scores[s][i]` holds subject `i`'s principal scores for structure `s`.
pub fn run_model_suite(
    cov: &CovariateTable,
    scores: &[Vec<PcScores>],
    opts: &SuiteOptions,
) -> Result<Vec<ModelReport>> {
    opts.models
        .par_iter()
        .map(|&id| {
            let spec = ModelSpec::table_model(id, scores.len(), opts.n_ps, opts.n_interact_ps)?;
            let out = stepwise_bidirectional(&spec, cov, scores, opts.criterion)?;
            let fit = &out.fit;
            let terms = (0..fit.n_columns())
                .map(|c| TermReport {
                    term: fit.names[c].clone(),
                    coefficient: fit.coefficients[c],
                    sign: if fit.coefficients[c] >= 0.0 { 1 } else { -1 },
                    p_value: fit.p_values[c],
                    significant: fit.p_values[c] < opts.alpha,
                })
                .collect();
            Ok(ModelReport {
                model: id,
                response: spec.response,
                predictors: predictors(id),
                n: fit.n,
                r_squared: fit.r_squared,
                adj_r_squared: fit.adj_r_squared,
                terms,
            })
        })
        .collect()
}

/// One CSV row per model; significant terms as `name(sign, p)` joined by `;`.
pub fn write_suite_csv(reports: &[ModelReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| ShapeError::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "model",
        "response",
        "predictors",
        "n",
        "r_squared",
        "adj_r_squared",
        "n_terms",
        "significant_terms",
    ])
    .map_err(io)?;
    for r in reports {
        let sig: Vec<String> = r
            .significant()
            .filter(|t| t.term != "intercept")
            .map(|t| {
                format!(
                    "{}({},{:.3e})",
                    t.term,
                    if t.sign > 0 { "+" } else { "-" },
                    t.p_value
                )
            })
            .collect();
        w.write_record([
            r.model.to_string(),
            r.response.name().to_string(),
            r.predictors.to_string(),
            r.n.to_string(),
            r.r_squared.to_string(),
            r.adj_r_squared.to_string(),
            r.terms.len().to_string(),
            sig.join(";"),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| ShapeError::io(path, e))
}

pub fn write_suite_json(reports: &[ModelReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(reports).map_err(|e| ShapeError::io(path, e.into()))?;
    fs::write(path, text).map_err(|e| ShapeError::io(path, e))
}
