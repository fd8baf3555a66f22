//! One-by-one cause addition with sign-flip detection.
//!
//! Step `t` regresses the outcome on the first `t` causes of the addition
//! order (plus the surrogate confounders in causal mode). A flip is a cause
//! whose coefficient is significant at consecutive steps with opposite signs.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CauseMatrix, OutcomeVector};
use crate::effects::{estimate_effects_causal, estimate_effects_noncausal};
use crate::error::{Error, Result};
use crate::ppca::SurrogateConfounders;

/// Significance level for flip eligibility.
pub const FLIP_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Causal,
    Noncausal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub mean: f64,
    pub std: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignFlip {
    pub cause: String,
    /// Step at which the new sign appears.
    pub step: usize,
    pub from_sign: i8,
    pub to_sign: i8,
    pub from_value: f64,
    pub to_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub mode: SweepMode,
    pub order: Vec<String>,
    /// `steps[t - 1][k]` is the cell of `order[k]` at step `t`, for `k < t`.
    pub steps: Vec<Vec<SweepCell>>,
    pub flips: Vec<SignFlip>,
}

impl SweepTable {
    /// Cell of `order[position]` at step `t` (1-based); `None` before it enters.
    pub fn cell(&self, position: usize, t: usize) -> Option<&SweepCell> {
        self.steps.get(t.checked_sub(1)?)?.get(position)
    }

    /// Triangular table with `-` before a cause enters; `*` marks p <= 0.05.
    pub fn render(&self) -> String {
        let d = self.order.len();
        let name_w = self
            .order
            .iter()
            .map(String::len)
            .chain(["Cause".len()])
            .max()
            .unwrap_or(5);
        let cells: Vec<Vec<String>> = (0..d)
            .map(|k| {
                (1..=d)
                    .map(|t| match self.cell(k, t) {
                        Some(c) => format!("{:.2}{}", c.mean, if c.significant { "*" } else { "" }),
                        None => "-".to_string(),
                    })
                    .collect()
            })
            .collect();
        let col_w = cells
            .iter()
            .flatten()
            .map(String::len)
            .chain([format!("t={d}").len()])
            .max()
            .unwrap_or(4);
        let mut out = String::new();
        let header: Vec<String> = (1..=d).map(|t| format!("{:>col_w$}", format!("t={t}"))).collect();
        writeln!(out, "{:<name_w$}  {}", "Cause", header.join("  ")).unwrap();
        for (k, row) in cells.iter().enumerate() {
            let row: Vec<String> = row.iter().map(|c| format!("{c:>col_w$}")).collect();
            writeln!(out, "{:<name_w$}  {}", self.order[k], row.join("  ")).unwrap();
        }
        if self.flips.is_empty() {
            writeln!(out, "sign flips: none").unwrap();
        } else {
            writeln!(out, "sign flips:").unwrap();
            for f in &self.flips {
                writeln!(
                    out,
                    "  {} at t={}: {:.2} -> {:.2}",
                    f.cause, f.step, f.from_value, f.to_value
                )
                .unwrap();
            }
        }
        out
    }
}

/// A seeded permutation of the cause names.
pub fn random_order(names: &[String], seed: u64) -> Vec<String> {
    let mut order = names.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Runs the addition sweep; causal mode iff `z` is given.
pub fn sweep(
    a: &CauseMatrix,
    z: Option<&SurrogateConfounders>,
    y: &OutcomeVector,
    order: &[String],
) -> Result<SweepTable> {
    let d = a.n_causes();
    let mut positions = Vec::with_capacity(order.len());
    for name in order {
        let j = a
            .column_index(name)
            .ok_or_else(|| Error::validation(format!("addition order names unknown cause `{name}`")))?;
        if positions.contains(&j) {
            return Err(Error::validation(format!("addition order repeats cause `{name}`")));
        }
        positions.push(j);
    }
    if positions.len() != d {
        return Err(Error::validation(format!(
            "addition order lists {} causes; expected a permutation of all {d}",
            positions.len()
        )));
    }

    let steps = (1..=d)
        .into_par_iter()
        .map(|t| {
            let sub = a.select_columns(&positions[..t])?;
            let est = match z {
                Some(z) => estimate_effects_causal(&sub, z, y, None)?,
                None => estimate_effects_noncausal(&sub, y, None)?,
            };
            Ok(est
                .cause_rows()
                .into_iter()
                .map(|r| SweepCell {
                    mean: r.mean,
                    std: r.std,
                    p_value: r.p_value,
                    significant: r.p_value <= FLIP_LEVEL,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let sign = |v: f64| -> i8 {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut flips = Vec::new();
    for t in 1..d {
        for k in 0..t {
            let (prev, next) = (&steps[t - 1][k], &steps[t][k]);
            if prev.significant && next.significant && sign(prev.mean) * sign(next.mean) < 0 {
                flips.push(SignFlip {
                    cause: order[k].clone(),
                    step: t + 1,
                    from_sign: sign(prev.mean),
                    to_sign: sign(next.mean),
                    from_value: prev.mean,
                    to_value: next.mean,
                });
            }
        }
    }
    Ok(SweepTable {
        mode: if z.is_some() {
            SweepMode::Causal
        } else {
            SweepMode::Noncausal
        },
        order: order.to_vec(),
        steps,
        flips,
    })
}
