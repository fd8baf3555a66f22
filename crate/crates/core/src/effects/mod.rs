//! Outcome regressions on causes, with and without surrogate confounders.

mod ols;
mod render;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

use crate::dataset::{CauseMatrix, CovariateMatrix, OutcomeVector};
use crate::error::{Error, Result};
use crate::ppca::SurrogateConfounders;

pub(crate) use ols::design_matrix;
#[cfg(test)]
use ols::ols;
pub use ols::{ols_fit, CoefficientRow, RegressionReport, Significance};
pub use render::{render_table, SIGNIFICANCE_FOOTNOTE};

/// Per-cause effects `β` and surrogate coefficients `γ` from one regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEffectEstimate {
    pub cause_names: Vec<String>,
    pub beta: Vec<f64>,
    /// Empty for the non-causal model.
    pub gamma: Vec<f64>,
    pub report: RegressionReport,
    /// Constant control columns left out of the design (absorbed by the intercept).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_controls: Vec<String>,
}

impl CausalEffectEstimate {
    /// Coefficient rows for the causes only.
    pub fn cause_rows(&self) -> Vec<&CoefficientRow> {
        self.cause_names.iter().filter_map(|n| self.report.row(n)).collect()
    }

    /// The cause-effect table (intercept and cause rows; controls omitted).
    pub fn render(&self, label: &str) -> String {
        render_table(&self.report, label, Some(&self.cause_names))
    }
}

/// A named block of control columns, centered before entering the design so
/// the intercept keeps its meaning as the outcome level at average controls.
struct Controls {
    values: DMatrix<f64>,
    names: Vec<String>,
    /// Index into the caller's block for each kept column; `None` entries dropped.
    kept: Vec<Option<usize>>,
    dropped: Vec<String>,
}

fn centered_controls(values: &DMatrix<f64>, names: Vec<String>) -> Controls {
    let mut kept_cols = Vec::new();
    let mut kept = Vec::with_capacity(values.ncols());
    let mut dropped = Vec::new();
    let mut kept_names = Vec::new();
    for (j, name) in names.into_iter().enumerate() {
        let col = values.column(j);
        let mean = col.mean();
        let centered = col.add_scalar(-mean);
        if centered.iter().all(|&v| v == 0.0) {
            kept.push(None);
            dropped.push(name);
        } else {
            kept.push(Some(kept_cols.len()));
            kept_cols.push(centered);
            kept_names.push(name);
        }
    }
    let values = if kept_cols.is_empty() {
        DMatrix::zeros(values.nrows(), 0)
    } else {
        DMatrix::from_columns(&kept_cols)
    };
    Controls {
        values,
        names: kept_names,
        kept,
        dropped,
    }
}

fn check_rows(
    a: &CauseMatrix,
    y: &OutcomeVector,
    z: Option<&SurrogateConfounders>,
    x: Option<&CovariateMatrix>,
) -> Result<()> {
    a.require_complete("effect estimation")?;
    y.check_pairs_with(a)?;
    if let Some(z) = z {
        if z.n_units() != a.n_units() {
            return Err(Error::validation(format!(
                "surrogate confounders have {} rows but the cause matrix has {}",
                z.n_units(),
                a.n_units()
            )));
        }
    }
    if let Some(x) = x {
        if x.n_rows() != a.n_units() {
            return Err(Error::validation(format!(
                "covariates have {} rows but the cause matrix has {}",
                x.n_rows(),
                a.n_units()
            )));
        }
    }
    Ok(())
}

fn estimate(
    a: &CauseMatrix,
    z: Option<&SurrogateConfounders>,
    y: &OutcomeVector,
    x: Option<&CovariateMatrix>,
) -> Result<CausalEffectEstimate> {
    check_rows(a, y, z, x)?;
    let n = a.n_units();
    let z_ctl = z.map(|z| centered_controls(&z.values, z.names()));
    let x_ctl = x.map(|x| centered_controls(x.values(), x.names.clone()));

    let mut blocks = vec![a.values()];
    let mut names: Vec<String> = a.column_names().to_vec();
    let mut dropped = Vec::new();
    for ctl in [&z_ctl, &x_ctl].into_iter().flatten() {
        blocks.push(&ctl.values);
        names.extend(ctl.names.iter().cloned());
        dropped.extend(ctl.dropped.iter().cloned());
    }
    if let Some(dup) = names
        .iter()
        .enumerate()
        .find(|(k, n)| names[..*k].contains(n))
        .map(|(_, n)| n.clone())
    {
        return Err(Error::validation(format!("design column name `{dup}` is used twice")));
    }
    let design = design_matrix(n, &blocks);
    let report = ols_fit(&design, y.values(), &names)?;
    let d = a.n_causes();
    let beta = report.rows[1..=d].iter().map(|r| r.mean).collect();
    let gamma = match &z_ctl {
        None => Vec::new(),
        Some(ctl) => ctl
            .kept
            .iter()
            .map(|k| k.map_or(0.0, |k| report.rows[1 + d + k].mean))
            .collect(),
    };
    Ok(CausalEffectEstimate {
        cause_names: a.column_names().to_vec(),
        beta,
        gamma,
        report,
        dropped_controls: dropped,
    })
}

/// Regresses `y` on `[1 | a | ẑ | x]`.
///
/// Surrogate and covariate columns are centered first; constant ones are
/// dropped and their coefficients reported as zero.
pub fn estimate_effects_causal(
    a: &CauseMatrix,
    z: &SurrogateConfounders,
    y: &OutcomeVector,
    x: Option<&CovariateMatrix>,
) -> Result<CausalEffectEstimate> {
    estimate(a, Some(z), y, x)
}

/// Regresses `y` on `[1 | a | x]`, ignoring hidden confounding.
pub fn estimate_effects_noncausal(
    a: &CauseMatrix,
    y: &OutcomeVector,
    x: Option<&CovariateMatrix>,
) -> Result<CausalEffectEstimate> {
    estimate(a, None, y, x)
}

/// `E[Y(a_to)] - E[Y(a_from)] = βᵀ(a_to - a_from)` under the linear outcome
/// model; the confounder and covariate terms cancel.
pub fn contrast(est: &CausalEffectEstimate, a_from: &[f64], a_to: &[f64]) -> Result<f64> {
    let d = est.beta.len();
    if a_from.len() != d || a_to.len() != d {
        return Err(Error::validation(format!(
            "contrast vectors must have length {d}, got {} and {}",
            a_from.len(),
            a_to.len()
        )));
    }
    Ok(est
        .beta
        .iter()
        .zip(a_to.iter().zip(a_from))
        .map(|(b, (t, f))| b * (t - f))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveComparison {
    pub causal: ErrorMetrics,
    pub noncausal: ErrorMetrics,
    pub n_train: usize,
    pub n_test: usize,
}

impl PredictiveComparison {
    /// MSE and MAE for both models side by side, two decimals.
    pub fn render(&self, label: &str) -> String {
        let width = label.len().max(7);
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:>18}  {:>18}", "Metrics", "MSE", "MAE").unwrap();
        writeln!(
            out,
            "{:<width$}  {:>7}  {:>9}  {:>7}  {:>9}",
            "Models", "Causal", "Noncausal", "Causal", "Noncausal"
        )
        .unwrap();
        writeln!(
            out,
            "{label:<width$}  {:>7.2}  {:>9.2}  {:>7.2}  {:>9.2}",
            self.causal.mse, self.noncausal.mse, self.causal.mae, self.noncausal.mae
        )
        .unwrap();
        out
    }
}

/// Fits both models on a seeded `train_fraction` split and scores them on
/// the held-out rows.
pub fn predictive_comparison(
    a: &CauseMatrix,
    z: &SurrogateConfounders,
    y: &OutcomeVector,
    train_fraction: f64,
    seed: u64,
) -> Result<PredictiveComparison> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::validation(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    check_rows(a, y, Some(z), None)?;
    let n = a.n_units();
    let q = a.n_causes() + z.latent_dim();
    let n_train = (train_fraction * n as f64).round() as usize;
    let n_test = n - n_train;
    if n_test < q + 2 {
        return Err(Error::validation(format!(
            "test split has {n_test} rows; need at least {}",
            q + 2
        )));
    }
    if n_train < q + 2 {
        return Err(Error::validation(format!(
            "training split has {n_train} rows; need at least {}",
            q + 2
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = idx.split_at(n_train);

    let take = |m: &DMatrix<f64>, rows: &[usize]| m.select_rows(rows);
    let y_train = DVector::from_iterator(train.len(), train.iter().map(|&i| y.values()[i]));
    let y_test: Vec<f64> = test.iter().map(|&i| y.values()[i]).collect();

    let score =
        |blocks_train: Vec<DMatrix<f64>>, blocks_test: Vec<DMatrix<f64>>, names: Vec<String>| -> Result<ErrorMetrics> {
            let refs: Vec<&DMatrix<f64>> = blocks_train.iter().collect();
            let fit = ols_fit(&design_matrix(train.len(), &refs), &y_train, &names)?;
            let coef = DVector::from_vec(fit.coefficients());
            let refs: Vec<&DMatrix<f64>> = blocks_test.iter().collect();
            let pred = design_matrix(test.len(), &refs) * coef;
            let (mut se, mut ae) = (0.0, 0.0);
            for (p, t) in pred.iter().zip(&y_test) {
                se += (p - t).powi(2);
                ae += (p - t).abs();
            }
            Ok(ErrorMetrics {
                mse: se / test.len() as f64,
                mae: ae / test.len() as f64,
            })
        };

    let mut cause_names = a.column_names().to_vec();
    let noncausal = score(
        vec![take(a.values(), train)],
        vec![take(a.values(), test)],
        cause_names.clone(),
    )?;
    cause_names.extend(z.names());
    let causal = score(
        vec![take(a.values(), train), take(&z.values, train)],
        vec![take(a.values(), test), take(&z.values, test)],
        cause_names,
    )?;
    Ok(PredictiveComparison {
        causal,
        noncausal,
        n_train,
        n_test,
    })
}
