//! Chained-equations imputation of missing cause entries.
//!
//! Deterministic regression-prediction variant: missing cells start at their
//! column means, then each sweep regresses every incomplete column on all the
//! others (rows where that column was observed) and overwrites its missing
//! cells with the fitted predictions.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::CauseMatrix;
use crate::error::{Error, Result};
use crate::linalg::least_squares;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiceConfig {
    /// Maximum number of sweeps.
    pub iterations: usize,
    /// Stop once the largest change of any imputed cell falls below this.
    pub convergence_tol: f64,
    pub seed: u64,
    /// Visit columns in a seeded random order each sweep instead of input order.
    pub randomize_order: bool,
}

impl Default for MiceConfig {
    fn default() -> Self {
        MiceConfig {
            iterations: 10,
            convergence_tol: 1e-6,
            seed: 0,
            randomize_order: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub matrix: CauseMatrix,
    /// Columns whose regression was singular and fell back to the column mean.
    pub fallback_columns: Vec<String>,
    pub sweeps: usize,
    pub converged: bool,
}

pub fn impute_mice(m: &CauseMatrix, cfg: &MiceConfig) -> Result<Imputation> {
    if cfg.iterations < 1 {
        return Err(Error::validation("MICE needs at least one iteration"));
    }
    let (n, d) = (m.n_units(), m.n_causes());
    for j in 0..d {
        let observed = (0..n).filter(|&i| !m.is_missing(i, j)).count();
        if observed < 2 {
            return Err(Error::validation(format!(
                "cause column `{}` has {observed} observed entries; imputation needs at least 2",
                m.column_names()[j]
            )));
        }
    }
    for i in 0..n {
        if (0..d).all(|j| m.is_missing(i, j)) {
            return Err(Error::validation(format!(
                "row {} (unit `{}`) has no observed causes",
                i + 1,
                m.unit_ids()[i]
            )));
        }
    }
    if !m.has_missing() {
        return Ok(Imputation {
            matrix: m.clone(),
            fallback_columns: Vec::new(),
            sweeps: 0,
            converged: true,
        });
    }

    let mut x = m.values().clone();
    let mut col_means = vec![0.0; d];
    for (j, mean) in col_means.iter_mut().enumerate() {
        let obs: Vec<f64> = (0..n).filter_map(|i| m.get(i, j)).collect();
        *mean = obs.iter().sum::<f64>() / obs.len() as f64;
        for i in 0..n {
            if m.is_missing(i, j) {
                x[(i, j)] = *mean;
            }
        }
    }

    let incomplete: Vec<usize> = (0..d).filter(|&j| (0..n).any(|i| m.is_missing(i, j))).collect();
    let mut order = incomplete.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut fallback = vec![false; d];
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < cfg.iterations {
        sweeps += 1;
        if cfg.randomize_order {
            order.shuffle(&mut rng);
        }
        let mut max_change: f64 = 0.0;
        for &j in &order {
            let predictions = match regress_column(&x, m, j) {
                Some(p) => p,
                None => {
                    fallback[j] = true;
                    vec![col_means[j]; n]
                }
            };
            for i in 0..n {
                if m.is_missing(i, j) {
                    max_change = max_change.max((predictions[i] - x[(i, j)]).abs());
                    x[(i, j)] = predictions[i];
                }
            }
        }
        if max_change < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    // observed cells are copied back untouched
    for i in 0..n {
        for j in 0..d {
            if let Some(v) = m.get(i, j) {
                x[(i, j)] = v;
            }
        }
    }
    let fallback_columns = (0..d)
        .filter(|&j| fallback[j])
        .map(|j| m.column_names()[j].clone())
        .collect();
    Ok(Imputation {
        matrix: m.replace_values(x)?,
        fallback_columns,
        sweeps,
        converged,
    })
}

/// OLS of column `j` on an intercept and every other column, fitted on the
/// rows where `j` was originally observed. `None` if the design is singular.
fn regress_column(x: &DMatrix<f64>, m: &CauseMatrix, j: usize) -> Option<Vec<f64>> {
    let (n, d) = x.shape();
    let rows: Vec<usize> = (0..n).filter(|&i| !m.is_missing(i, j)).collect();
    let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
    let p = others.len() + 1;
    if rows.len() <= p {
        return None;
    }
    let design = DMatrix::from_fn(
        rows.len(),
        p,
        |r, c| if c == 0 { 1.0 } else { x[(rows[r], others[c - 1])] },
    );
    let target = DVector::from_iterator(rows.len(), rows.iter().map(|&i| x[(i, j)]));
    let names: Vec<String> = (0..p).map(|c| c.to_string()).collect();
    let fit = least_squares(&design, &target, &names).ok()?;
    Some(
        (0..n)
            .map(|i| {
                fit.coef[0]
                    + others
                        .iter()
                        .enumerate()
                        .map(|(c, &k)| fit.coef[c + 1] * x[(i, k)])
                        .sum::<f64>()
            })
            .collect(),
    )
}
