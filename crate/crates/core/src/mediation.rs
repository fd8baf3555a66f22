//! Four-step mediation analysis with the rating as mediator and surrogate
//! confounders as controls.
//!
//! 1. causes (+ surrogates) -> popularity: total effects `β`
//! 2. causes (+ surrogates) -> rating: `θ`
//! 3. rating -> popularity, two-sided t-test on the rating coefficient
//! 4. causes (+ surrogates) + rating -> popularity: direct effects `β_m`, `λ`
//!
//! Steps 1, 2 and 4 share the cause and surrogate design, so the OLS
//! estimates satisfy `β = β_m + λ θ` exactly.

use std::fmt::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{CauseMatrix, CovariateMatrix, OutcomeVector};
use crate::effects::{design_matrix, estimate_effects_causal, ols_fit, RegressionReport, Significance};
use crate::error::{Error, Result};
use crate::ppca::SurrogateConfounders;

/// Tolerance of the total = direct + indirect identity, relative to the
/// largest total effect.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediationStatus {
    /// Not significant at 5% in steps 1 and 2, or the mediator itself is not.
    NotMediated,
    /// Significant in step 1 but not in step 4.
    FullyMediated,
    /// Significant in both step 1 and step 4: a direct effect persists.
    PartiallyMediated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationReport {
    pub cause_names: Vec<String>,
    pub step1: RegressionReport,
    pub step2: RegressionReport,
    pub step3: RegressionReport,
    pub step4: RegressionReport,
    /// `β` from step 1.
    pub beta_total: Vec<f64>,
    /// `β_m` from step 4.
    pub beta_direct: Vec<f64>,
    /// Cause coefficients on the mediator from step 2.
    pub theta: Vec<f64>,
    /// Mediator coefficient in step 4.
    pub lambda: f64,
    /// `β - β_m`.
    pub attenuation: Vec<f64>,
    pub status: Vec<MediationStatus>,
    pub mediator_significant: bool,
    /// `max_j |β_j - β_m,j - λ θ_j|`.
    pub decomposition_error: f64,
}

impl MediationReport {
    fn significance(report: &RegressionReport, name: &str) -> Significance {
        report.row(name).map_or(Significance::None, |r| r.significance)
    }

    /// Causes significant at 5% in both step 1 and step 4.
    pub fn persistent_causes(&self) -> Vec<usize> {
        (0..self.cause_names.len())
            .filter(|&j| {
                let name = &self.cause_names[j];
                Self::significance(&self.step1, name).at_five_percent()
                    && Self::significance(&self.step4, name).at_five_percent()
            })
            .collect()
    }

    /// One column per persistent cause with `β` and `β_m` rows.
    pub fn render(&self) -> String {
        let cols = self.persistent_causes();
        let cell = |v: f64, sig: Significance| format!("{v:.2}{}", sig.marker());
        let mut header = vec!["Cause".to_string()];
        let mut total = vec!["beta".to_string()];
        let mut direct = vec!["beta_m".to_string()];
        for &j in &cols {
            let name = &self.cause_names[j];
            header.push(name.clone());
            total.push(cell(self.beta_total[j], Self::significance(&self.step1, name)));
            direct.push(cell(self.beta_direct[j], Self::significance(&self.step4, name)));
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| header[c].len().max(total[c].len()).max(direct[c].len()))
            .collect();
        let mut out = String::new();
        for line in [&header, &total, &direct] {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        }
        if cols.is_empty() {
            writeln!(out, "(no cause is significant at 5% in both step 1 and step 4)").unwrap();
        }
        writeln!(
            out,
            "mediator `{}`: lambda = {:.2}{} (step 3 {})",
            self.step4.rows.last().map_or("", |r| r.name.as_str()),
            self.lambda,
            self.step4.rows.last().map_or("", |r| r.significance.marker()),
            if self.mediator_significant {
                "significant"
            } else {
                "not significant"
            }
        )
        .unwrap();
        out
    }
}

/// Runs the four regressions and the decomposition check.
pub fn mediate(
    a: &CauseMatrix,
    z: &SurrogateConfounders,
    rating: &OutcomeVector,
    popularity: &OutcomeVector,
) -> Result<MediationReport> {
    rating.check_pairs_with(a)?;
    popularity.check_pairs_with(a)?;
    if rating.values() == popularity.values() {
        return Err(Error::validation("mediator and outcome are the same vector"));
    }
    if a.column_index(&rating.name).is_some() || z.names().contains(&rating.name) {
        return Err(Error::validation(format!(
            "mediator name `{}` clashes with a design column",
            rating.name
        )));
    }
    let n = a.n_units();
    let step1 = estimate_effects_causal(a, z, popularity, None)?;
    let step2 = estimate_effects_causal(a, z, rating, None)?;
    let r_block = CovariateMatrix::new(
        DMatrix::from_column_slice(n, 1, rating.values().as_slice()),
        vec![rating.name.clone()],
    )?;
    let step4 = estimate_effects_causal(a, z, popularity, Some(&r_block))?;
    let r_col = DMatrix::from_column_slice(n, 1, rating.values().as_slice());
    let step3 = ols_fit(
        &design_matrix(n, &[&r_col]),
        popularity.values(),
        std::slice::from_ref(&rating.name),
    )?;

    let lambda = step4.report.rows.last().expect("mediator row").mean;
    let beta_total = step1.beta.clone();
    let beta_direct = step4.beta.clone();
    let theta = step2.beta.clone();
    let decomposition_error = (0..beta_total.len())
        .map(|j| (beta_total[j] - beta_direct[j] - lambda * theta[j]).abs())
        .fold(0.0, f64::max);
    let scale = 1.0 + beta_total.iter().map(|b| b.abs()).fold(0.0, f64::max);
    if decomposition_error > DECOMPOSITION_TOL * scale {
        return Err(Error::Numeric(format!(
            "mediation decomposition residual {decomposition_error:.3e} exceeds tolerance"
        )));
    }

    let mediator_significant = step3.rows[1].significance.at_five_percent();
    let status = a
        .column_names()
        .iter()
        .map(|name| {
            let sig = |r: &RegressionReport| r.row(name).is_some_and(|row| row.significance.at_five_percent());
            if !(sig(&step1.report) && sig(&step2.report) && mediator_significant) {
                MediationStatus::NotMediated
            } else if sig(&step4.report) {
                MediationStatus::PartiallyMediated
            } else {
                MediationStatus::FullyMediated
            }
        })
        .collect();
    let attenuation = beta_total.iter().zip(&beta_direct).map(|(t, d)| t - d).collect();
    Ok(MediationReport {
        cause_names: a.column_names().to_vec(),
        step1: step1.report,
        step2: step2.report,
        step3,
        step4: step4.report,
        beta_total,
        beta_direct,
        theta,
        lambda,
        attenuation,
        status,
        mediator_significant,
        decomposition_error,
    })
}
