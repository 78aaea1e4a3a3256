use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::{ols_fit_named, RegressionFit};
use super::{design_matrix, CovariateTable, ModelSpec, Term};
use crate::error::{Result, ShapeError};
use crate::statistics::PcScores;

/// Selection criterion for [`stepwise_bidirectional`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Aic,
    Bic,
    /// Add the most significant candidate if its p-value is below `enter`;
    /// otherwise drop the least significant term if above `exit`.
    PValue {
        enter: f64,
        exit: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct StepwiseResult {
    pub terms: Vec<Term>,
    pub fit: RegressionFit,
    /// Criterion value after each accepted move, starting from the forced
    /// model. Empty for the p-value rule.
    pub criterion_trace: Vec<f64>,
    /// Accepted moves in order, as `+term` or `-term`.
    pub moves: Vec<String>,
}

struct Problem<'a> {
    x: DMatrix<f64>,
    y: DVector<f64>,
    terms: &'a [Term],
    names: Vec<String>,
}

impl Problem<'_> {
    fn fit(&self, set: &[usize]) -> Result<RegressionFit> {
        let x = self.x.select_columns(set);
        let names: Vec<String> = set.iter().map(|&i| self.names[i].clone()).collect();
        ols_fit_named(&x, &self.y, &names)
    }

    /// Interactions may enter only alongside their main score effect.
    fn can_add(&self, set: &[usize], idx: usize) -> bool {
        let t = self.terms[idx];
        if !t.is_interaction() {
            return true;
        }
        let (structure, k) = t.ps().unwrap();
        set.iter()
            .any(|&i| self.terms[i] == Term::Ps { structure, k })
    }

    /// A main score effect may leave only once its interactions have.
    fn can_drop(&self, set: &[usize], idx: usize) -> bool {
        let t = self.terms[idx];
        if t.is_covariate() {
            return false;
        }
        let Term::Ps { structure, k } = t else {
            return true;
        };
        !set.iter().any(|&i| {
            let o = self.terms[i];
            o.is_interaction() && o.ps() == Some((structure, k))
        })
    }
}

fn value(c: Criterion, fit: &RegressionFit) -> f64 {
    match c {
        Criterion::Bic => fit.bic(),
        _ => fit.aic(),
    }
}

fn with(set: &[usize], idx: usize) -> Vec<usize> {
    let mut s = set.to_vec();
    s.push(idx);
    s.sort_unstable();
    s
}

fn without(set: &[usize], idx: usize) -> Vec<usize> {
    set.iter().copied().filter(|&i| i != idx).collect()
}

/// Skip candidates that make the design singular or underdetermined.
fn try_fit(problem: &Problem, set: &[usize]) -> Result<Option<RegressionFit>> {
    match problem.fit(set) {
        Ok(f) => Ok(Some(f)),
        Err(ShapeError::RankDeficient { .. } | ShapeError::Underdetermined { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Bidirectional stepwise selection over the shape terms of `spec_full`.
///
/// Starts from the spec's covariate terms (never removed) and repeatedly
/// applies the single add-or-drop move that most improves the criterion,
/// scanning adds then drops in term order and keeping the first of equal
/// candidates. Interactions are only offered once their main score term is
/// in the model, and a main term is not dropped while its interactions
/// remain.
pub fn stepwise_bidirectional(
    spec_full: &ModelSpec,
    cov: &CovariateTable,
    scores: &[Vec<PcScores>],
    criterion: Criterion,
) -> Result<StepwiseResult> {
    let x = design_matrix(spec_full, cov, scores, false)?;
    let y = DVector::from_vec(cov.response(spec_full.response));
    let terms = spec_full.terms();
    let problem = Problem {
        x,
        y,
        terms,
        names: terms.iter().map(Term::to_string).collect(),
    };

    let mut set: Vec<usize> = (0..terms.len())
        .filter(|&i| terms[i].is_covariate())
        .collect();
    let mut fit = problem.fit(&set)?;
    let mut trace = Vec::new();
    let mut moves = Vec::new();

    match criterion {
        Criterion::Aic | Criterion::Bic => {
            let mut current = value(criterion, &fit);
            trace.push(current);
            loop {
                let mut best: Option<(f64, Vec<usize>, RegressionFit, String)> = None;
                let adds =
                    (0..terms.len()).filter(|i| !set.contains(i) && problem.can_add(&set, *i));
                let drops = set.iter().copied().filter(|&i| problem.can_drop(&set, i));
                let candidates = adds
                    .map(|i| (with(&set, i), format!("+{}", terms[i])))
                    .chain(drops.map(|i| (without(&set, i), format!("-{}", terms[i]))))
                    .collect::<Vec<_>>();
                for (cand, label) in candidates {
                    let Some(f) = try_fit(&problem, &cand)? else {
                        continue;
                    };
                    let v = value(criterion, &f);
                    if best.as_ref().is_none_or(|b| v < b.0) {
                        best = Some((v, cand, f, label));
                    }
                }
                match best {
                    Some((v, cand, f, label)) if v < current => {
                        log::debug!("stepwise {label}: criterion {current:.4} -> {v:.4}");
                        current = v;
                        set = cand;
                        fit = f;
                        trace.push(v);
                        moves.push(label);
                    }
                    _ => break,
                }
            }
        }
        Criterion::PValue { enter, exit } => {
            if !(enter > 0.0 && enter < exit && exit <= 1.0) {
                return Err(ShapeError::OutOfRange(format!(
                    "p-value thresholds need 0 < enter < exit <= 1 (got {enter}, {exit})"
                )));
            }
            // each term can enter and leave a bounded number of times
            let max_moves = 4 * terms.len();
            while moves.len() < max_moves {
                let mut best_add: Option<(f64, usize, RegressionFit)> = None;
                for i in (0..terms.len()).filter(|i| !set.contains(i) && problem.can_add(&set, *i))
                {
                    let cand = with(&set, i);
                    let Some(f) = try_fit(&problem, &cand)? else {
                        continue;
                    };
                    let pos = cand.iter().position(|&c| c == i).unwrap();
                    let p = f.p_values[pos];
                    if p < enter && best_add.as_ref().is_none_or(|b| p < b.0) {
                        best_add = Some((p, i, f));
                    }
                }
                if let Some((_, i, f)) = best_add {
                    set = with(&set, i);
                    fit = f;
                    moves.push(format!("+{}", terms[i]));
                    continue;
                }
                let worst = set
                    .iter()
                    .enumerate()
                    .filter(|(_, &i)| problem.can_drop(&set, i))
                    .map(|(pos, &i)| (fit.p_values[pos], i))
                    .filter(|(p, _)| *p > exit)
                    .fold(None, |acc: Option<(f64, usize)>, c| match acc {
                        Some(a) if a.0 >= c.0 => Some(a),
                        _ => Some(c),
                    });
                let Some((_, i)) = worst else { break };
                set = without(&set, i);
                fit = problem.fit(&set)?;
                moves.push(format!("-{}", terms[i]));
            }
        }
    }

    Ok(StepwiseResult {
        terms: set.iter().map(|&i| terms[i]).collect(),
        fit,
        criterion_trace: trace,
        moves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{Strictness, Subject};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    fn cohort(
        n: usize,
        seed: u64,
        signal: impl Fn(&Subject, &[f64]) -> f64,
    ) -> (CovariateTable, Vec<Vec<PcScores>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, 1.0).unwrap();
        let age = Uniform::new(20.0, 60.0).unwrap();
        let mut rows = Vec::new();
        let mut scores = Vec::new();
        for i in 0..n {
            let ps: Vec<f64> = (0..6).map(|_| z.sample(&mut rng)).collect();
            let mut s = Subject {
                id: i.to_string(),
                age: age.sample(&mut rng),
                bdi: (z.sample(&mut rng) * 5.0 + 15.0).clamp(0.0, 63.0),
                icv: 1500.0,
                pss: 0.0,
                ctqtot: 50.0,
                label: 0,
            };
            s.pss = signal(&s, &ps) + z.sample(&mut rng);
            rows.push(s);
            scores.push(PcScores(ps));
        }
        (
            CovariateTable::new(rows, Strictness::Lenient).unwrap(),
            vec![scores],
        )
    }

    #[test]
    fn recovers_single_strong_score() {
        let (cov, scores) = cohort(200, 3, |_, ps| 20.0 + 3.0 * ps[1]);
        let spec = ModelSpec::table_model(2, 1, 6, 0).unwrap();
        let out = stepwise_bidirectional(&spec, &cov, &scores, Criterion::Aic).unwrap();
        assert!(out.terms.contains(&Term::Ps { structure: 0, k: 2 }));
        assert!(out.terms.contains(&Term::Age) && out.terms.contains(&Term::Bdi));
        for w in out.criterion_trace.windows(2) {
            assert!(w[1] < w[0]);
        }
        let again = stepwise_bidirectional(&spec, &cov, &scores, Criterion::Aic).unwrap();
        assert_eq!(again.terms, out.terms);
    }

    #[test]
    fn interaction_enters_with_its_main_effect() {
        let (cov, scores) = cohort(300, 5, |s, ps| 10.0 + 0.2 * s.age * ps[0]);
        let spec = ModelSpec::table_model(1, 1, 6, 3).unwrap();
        let out = stepwise_bidirectional(&spec, &cov, &scores, Criterion::Bic).unwrap();
        assert!(out.terms.contains(&Term::AgeXPs { structure: 0, k: 1 }));
        assert!(out.terms.contains(&Term::Ps { structure: 0, k: 1 }));
    }

    #[test]
    fn p_value_rule() {
        let (cov, scores) = cohort(200, 8, |_, ps| 5.0 - 2.0 * ps[3]);
        let spec = ModelSpec::table_model(2, 1, 6, 0).unwrap();
        let c = Criterion::PValue {
            enter: 0.01,
            exit: 0.05,
        };
        let out = stepwise_bidirectional(&spec, &cov, &scores, c).unwrap();
        assert!(out.terms.contains(&Term::Ps { structure: 0, k: 4 }));
        let bad = Criterion::PValue {
            enter: 0.1,
            exit: 0.05,
        };
        assert!(stepwise_bidirectional(&spec, &cov, &scores, bad).is_err());
    }
}
