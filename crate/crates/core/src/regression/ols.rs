use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Result, ShapeError};

/// Least-squares fit with classical inference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// `RSS / (n - columns)`.
    pub residual_variance: f64,
    pub rss: f64,
    pub n: usize,
    /// Residual degrees of freedom.
    pub df: usize,
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    /// Number of fitted columns.
    pub fn n_columns(&self) -> usize {
        self.coefficients.len()
    }

    /// Gaussian AIC up to an additive constant: `n ln(RSS/n) + 2 columns`.
    pub fn aic(&self) -> f64 {
        self.log_rss_term() + 2.0 * self.n_columns() as f64
    }

    /// `n ln(RSS/n) + columns ln n`.
    pub fn bic(&self) -> f64 {
        self.log_rss_term() + self.n_columns() as f64 * (self.n as f64).ln()
    }

    fn log_rss_term(&self) -> f64 {
        let n = self.n as f64;
        // a perfect fit has RSS = 0; floor it so criteria stay finite
        n * (self.rss.max(f64::MIN_POSITIVE) / n).ln()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }
}

/// `1 - (1 - R²)(n - 1)/(n - p - 1)` with `p` predictors excluding the
/// intercept.
pub fn adjusted_r_squared(r2: f64, n: usize, p: usize) -> f64 {
    1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0)
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t with `df`
/// degrees of freedom, as `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// [`ols_fit_named`] with columns named `x0, x1, ...`.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<RegressionFit> {
    let names: Vec<String> = (0..x.ncols()).map(|c| format!("x{c}")).collect();
    ols_fit_named(x, y, &names)
}

fn is_intercept(col: nalgebra::DMatrixView<f64>) -> bool {
    col.iter().all(|&v| v == 1.0)
}

/// Ordinary least squares through the SVD of `X`.
///
/// A column of ones is treated as the intercept: it is excluded from the
/// predictor count of adjusted R², and R² is computed about the mean of `y`.
/// Without such a column R² is computed about zero.
pub fn ols_fit_named(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
) -> Result<RegressionFit> {
    let (n, p) = x.shape();
    if y.len() != n || names.len() != p {
        return Err(ShapeError::DimensionMismatch(format!(
            "design {n}x{p}, response of length {}, {} names",
            y.len(),
            names.len()
        )));
    }
    if n < p + 1 {
        return Err(ShapeError::Underdetermined { rows: n, cols: p });
    }
    if let Some(r) = y.iter().position(|v| !v.is_finite()) {
        return Err(ShapeError::NonFinite(r));
    }

    let svd = x.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(ShapeError::Numerical("SVD did not converge".into())),
    };
    let s = &svd.singular_values;
    let s_max = s.max();
    let tol = s_max * n.max(p) as f64 * f64::EPSILON * 16.0;
    let null: Vec<usize> = (0..p).filter(|&i| !(s[i] > tol)).collect();
    if !null.is_empty() {
        let mut columns: Vec<String> = (0..p)
            .filter(|&c| null.iter().any(|&i| v_t[(i, c)].abs() > 1e-8))
            .map(|c| names[c].clone())
            .collect();
        if columns.is_empty() {
            columns = names.to_vec();
        }
        return Err(ShapeError::RankDeficient { columns });
    }

    let uty = u.transpose() * y;
    let scaled = DVector::from_iterator(p, (0..p).map(|i| uty[i] / s[i]));
    let beta = v_t.transpose() * scaled;
    let fitted = x * &beta;
    let resid = y - fitted;
    let rss = resid.norm_squared();

    let has_intercept = (0..p).any(|c| is_intercept(x.column(c).as_view()));
    let tss = if has_intercept {
        let m = y.mean();
        y.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let predictors = if has_intercept { p - 1 } else { p };
    let adj = adjusted_r_squared(r2, n, predictors);

    let df = n - p;
    let sigma2 = rss / df as f64;
    // diag((X^T X)^-1) = sum_i V_ci² / s_i²
    let se: Vec<f64> = (0..p)
        .map(|c| {
            let d: f64 = (0..p).map(|i| (v_t[(i, c)] / s[i]).powi(2)).sum();
            (sigma2 * d).sqrt()
        })
        .collect();
    let t: Vec<f64> = beta.iter().zip(&se).map(|(b, e)| b / e).collect();
    let pv: Vec<f64> = t.iter().map(|&t| t_two_sided_p(t, df as f64)).collect();

    Ok(RegressionFit {
        names: names.to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors: se,
        t_values: t,
        p_values: pv,
        r_squared: r2,
        adj_r_squared: adj,
        residual_variance: sigma2,
        rss,
        n,
        df,
        residuals: resid.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_intercept(cols: &[Vec<f64>]) -> DMatrix<f64> {
        let n = cols[0].len();
        DMatrix::from_fn(
            n,
            cols.len() + 1,
            |r, c| if c == 0 { 1.0 } else { cols[c - 1][r] },
        )
    }

    #[test]
    fn exact_linear_response() {
        let x1: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let x2: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let x = with_intercept(&[x1.clone(), x2.clone()]);
        let y = DVector::from_fn(20, |r, _| 1.5 - 2.0 * x1[r] + 0.25 * x2[r]);
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-10));
        assert!((fit.coefficients[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn t_tail_reference_values() {
        // t = 2.228139 is the two-sided 5% point at 10 df
        assert!((t_two_sided_p(2.228_138_851_986_274, 10.0) - 0.05).abs() < 1e-9);
        // df = 1 is Cauchy: P(|T| > 1) = 1/2
        assert!((t_two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(t_two_sided_p(0.0, 5.0), 1.0);
        assert_eq!(t_two_sided_p(f64::INFINITY, 5.0), 0.0);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let c: Vec<f64> = a.iter().zip(&b).map(|(a, b)| 2.0 * a - b).collect();
        let x = with_intercept(&[a, b, c]);
        let y = DVector::from_fn(10, |r, _| r as f64);
        let names: Vec<String> = ["intercept", "a", "b", "c"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        match ols_fit_named(&x, &y, &names) {
            Err(ShapeError::RankDeficient { columns }) => {
                assert_eq!(columns, vec!["a", "b", "c"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn underdetermined() {
        let x = DMatrix::from_element(3, 3, 1.0);
        let y = DVector::zeros(3);
        assert!(matches!(
            ols_fit(&x, &y),
            Err(ShapeError::Underdetermined { rows: 3, cols: 3 })
        ));
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let x = DMatrix::from_fn(30, 4, |r, c| {
            if c == 0 {
                1.0
            } else {
                ((r * (c + 3)) % 11) as f64
            }
        });
        let y = DVector::from_fn(30, |r, _| ((r * 13) % 7) as f64);
        let fit = ols_fit(&x, &y).unwrap();
        let res = DVector::from_vec(fit.residuals.clone());
        assert!((x.transpose() * res).amax() <= 1e-8 * y.norm());
        assert!(fit.adj_r_squared <= fit.r_squared);
        assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
