use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::stats::StudentT;

/// Significance tag. The marker strings follow the tables this crate
/// reproduces: `*` for 5% and `**` for 10%.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "5%")]
    FivePercent,
    #[serde(rename = "10%")]
    TenPercent,
    #[serde(rename = "none")]
    None,
}

impl Significance {
    pub fn from_p(p: f64) -> Self {
        if p <= 0.05 {
            Significance::FivePercent
        } else if p <= 0.10 {
            Significance::TenPercent
        } else {
            Significance::None
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            Significance::FivePercent => "*",
            Significance::TenPercent => "**",
            Significance::None => "",
        }
    }

    pub fn at_five_percent(self) -> bool {
        self == Significance::FivePercent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significance: Significance,
}

/// OLS coefficient table; the intercept row is always first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub rows: Vec<CoefficientRow>,
    pub residual_variance: f64,
    pub n: usize,
    pub dof: usize,
    /// Condition number of the column-equilibrated design.
    pub condition: f64,
}

impl RegressionReport {
    pub fn row(&self, name: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn intercept(&self) -> &CoefficientRow {
        &self.rows[0]
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }
}

/// Fitted OLS model: the report plus raw quantities callers need.
#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    pub report: RegressionReport,
    #[cfg_attr(not(test), allow(dead_code))]
    pub residuals: DVector<f64>,
}

/// Ordinary least squares with Student-t inference.
///
/// `design` must carry the intercept as its first column; `names` labels
/// the remaining columns (the intercept row is named `Intercept`).
pub fn ols_fit(design: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<RegressionReport> {
    Ok(ols(design, y, names)?.report)
}

pub(crate) fn ols(design: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit> {
    let (n, p) = design.shape();
    if names.len() + 1 != p {
        return Err(Error::validation(format!(
            "{} names for {} non-intercept design columns",
            names.len(),
            p - 1
        )));
    }
    if y.len() != n {
        return Err(Error::validation(format!(
            "design has {n} rows but the outcome has {}",
            y.len()
        )));
    }
    if p == 0 || design.column(0).iter().any(|&v| v != 1.0) {
        return Err(Error::validation(
            "the first design column must be the intercept (all ones)",
        ));
    }
    if n <= p {
        return Err(Error::validation(format!(
            "need more observations ({n}) than coefficients ({p})"
        )));
    }
    let mut labels = Vec::with_capacity(p);
    labels.push("Intercept".to_string());
    labels.extend(names.iter().cloned());

    let ls = least_squares(design, y, &labels)?;
    let residuals = y - design * &ls.coef;
    let dof = n - p;
    let rss = residuals.norm_squared();
    let s2 = rss / dof as f64;
    let dist = StudentT::new(dof as f64);
    let q = dist.quantile(0.975);

    let rows = (0..p)
        .map(|j| {
            let mean = ls.coef[j];
            let std = (s2 * ls.xtx_inv[(j, j)]).max(0.0).sqrt();
            let (t_stat, p_value) = if std > 0.0 {
                let t = mean / std;
                (t, dist.two_sided_p(t))
            } else if mean == 0.0 {
                (0.0, 1.0)
            } else {
                (mean.signum() * f64::INFINITY, 0.0)
            };
            CoefficientRow {
                name: labels[j].clone(),
                mean,
                std,
                t_stat,
                p_value,
                ci_low: mean - q * std,
                ci_high: mean + q * std,
                significance: Significance::from_p(p_value),
            }
        })
        .collect();
    Ok(OlsFit {
        report: RegressionReport {
            rows,
            residual_variance: s2,
            n,
            dof,
            condition: ls.condition,
        },
        residuals,
    })
}

/// `[1 | blocks...]` as one design matrix.
pub(crate) fn design_matrix(n: usize, blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let p = 1 + blocks.iter().map(|b| b.ncols()).sum::<usize>();
    let mut x = DMatrix::zeros(n, p);
    x.column_mut(0).fill(1.0);
    let mut col = 1;
    for b in blocks {
        debug_assert_eq!(b.nrows(), n);
        x.view_mut((0, col), (n, b.ncols())).copy_from(b);
        col += b.ncols();
    }
    x
}
