//! Tabular data model: causes, outcomes and covariates, plus CSV ingestion,
//! standardization, correlation screening, overlap diagnostics and held-out
//! masking.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-unit cause scores with a missingness mask.
///
/// Missing cells hold `NaN` in [`CauseMatrix::values`].
#[derive(Debug, Clone, PartialEq)]
pub struct CauseMatrix {
    values: DMatrix<f64>,
    missing: Vec<bool>,
    column_names: Vec<String>,
    unit_ids: Vec<String>,
}

impl CauseMatrix {
    /// Builds a fully observed matrix. Unit ids default to `1..=N`.
    pub fn new(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let n = values.nrows();
        let missing = vec![false; n * values.ncols()];
        Self::with_missing(values, missing, column_names, default_ids(n))
    }

    /// Builds a matrix with an explicit row-major missingness mask.
    pub fn with_missing(
        mut values: DMatrix<f64>,
        missing: Vec<bool>,
        column_names: Vec<String>,
        unit_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = values.shape();
        if n < 2 {
            return Err(Error::validation(format!(
                "cause matrix needs at least 2 rows, got {n}"
            )));
        }
        if d < 1 {
            return Err(Error::validation("cause matrix needs at least 1 column"));
        }
        if column_names.len() != d {
            return Err(Error::validation(format!(
                "{} column names for {d} cause columns",
                column_names.len()
            )));
        }
        if unit_ids.len() != n {
            return Err(Error::validation(format!("{} unit ids for {n} rows", unit_ids.len())));
        }
        if missing.len() != n * d {
            return Err(Error::validation("missingness mask has the wrong size"));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::validation(format!("duplicate cause column `{name}`")));
            }
        }
        let mut seen = HashSet::new();
        for id in &unit_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::validation(format!("duplicate unit id `{id}`")));
            }
        }
        for j in 0..d {
            if (0..n).all(|i| missing[i * d + j]) {
                return Err(Error::validation(format!(
                    "cause column `{}` is entirely missing",
                    column_names[j]
                )));
            }
        }
        for i in 0..n {
            for j in 0..d {
                if missing[i * d + j] {
                    values[(i, j)] = f64::NAN;
                } else if !values[(i, j)].is_finite() {
                    return Err(Error::validation(format!(
                        "non-finite observed value at row {}, column `{}`",
                        i + 1,
                        column_names[j]
                    )));
                }
            }
        }
        Ok(CauseMatrix {
            values,
            missing,
            column_names,
            unit_ids,
        })
    }

    pub fn n_units(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_causes(&self) -> usize {
        self.values.ncols()
    }

    /// Raw values; missing cells are `NaN`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.n_causes() + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (!self.is_missing(i, j)).then(|| self.values[(i, j)])
    }

    /// Row-major missingness mask.
    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub(crate) fn require_complete(&self, op: &str) -> Result<()> {
        if let Some(pos) = self.missing.iter().position(|&m| m) {
            let d = self.n_causes();
            return Err(Error::validation(format!(
                "{op} requires a complete cause matrix; row {} column `{}` is missing (run imputation first)",
                pos / d + 1,
                self.column_names[pos % d]
            )));
        }
        Ok(())
    }

    /// A copy with the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<CauseMatrix> {
        let n = self.n_units();
        let d = self.n_causes();
        let values = DMatrix::from_fn(n, columns.len(), |i, k| self.values[(i, columns[k])]);
        let mut missing = Vec::with_capacity(n * columns.len());
        for i in 0..n {
            for &j in columns {
                missing.push(self.missing[i * d + j]);
            }
        }
        let names = columns.iter().map(|&j| self.column_names[j].clone()).collect();
        CauseMatrix::with_missing(values, missing, names, self.unit_ids.clone())
    }

    /// A copy with the same labels but new (complete) values.
    pub(crate) fn replace_values(&self, values: DMatrix<f64>) -> Result<CauseMatrix> {
        let missing = vec![false; values.nrows() * values.ncols()];
        CauseMatrix::with_missing(values, missing, self.column_names.clone(), self.unit_ids.clone())
    }
}

fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Rating,
    Popularity,
    Custom,
}

impl OutcomeKind {
    /// Infers the kind from a column name.
    pub fn from_name(name: &str) -> Self {
        match name.to_ascii_lowercase().as_str() {
            "rating" | "ratings" | "stars" => OutcomeKind::Rating,
            "popularity" => OutcomeKind::Popularity,
            _ => OutcomeKind::Custom,
        }
    }
}

/// A fully observed per-unit outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeVector {
    pub name: String,
    pub kind: OutcomeKind,
    values: DVector<f64>,
}

impl OutcomeVector {
    pub fn new(name: impl Into<String>, kind: OutcomeKind, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "outcome `{name}` has a missing or non-finite value at row {}",
                i + 1
            )));
        }
        Ok(OutcomeVector {
            name,
            kind,
            values: DVector::from_vec(values),
        })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.mean()
    }

    pub(crate) fn check_pairs_with(&self, causes: &CauseMatrix) -> Result<()> {
        if self.len() != causes.n_units() {
            return Err(Error::validation(format!(
                "outcome `{}` has {} rows but the cause matrix has {}",
                self.name,
                self.len(),
                causes.n_units()
            )));
        }
        Ok(())
    }
}

/// Observed per-unit controls; may have zero columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    pub names: Vec<String>,
    values: DMatrix<f64>,
}

impl CovariateMatrix {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::validation("covariate names do not match column count"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("covariates must be fully observed"));
        }
        Ok(CovariateMatrix { names, values })
    }

    pub fn empty(n: usize) -> Self {
        CovariateMatrix {
            names: Vec::new(),
            values: DMatrix::zeros(n, 0),
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_covariates(&self) -> usize {
        self.values.ncols()
    }
}

/// Everything read from one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub causes: CauseMatrix,
    pub outcomes: Vec<OutcomeVector>,
    pub covariates: Option<CovariateMatrix>,
}

impl Dataset {
    pub fn outcome(&self, name: &str) -> Result<&OutcomeVector> {
        self.outcomes
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| Error::validation(format!("no outcome column named `{name}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Cause,
    Outcome,
    Covariate,
    Id,
    Ignore,
}

/// Maps CSV header names to roles. Columns not named explicitly take the
/// default role; without a default, an unmapped column is an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub roles: Vec<(String, ColumnRole)>,
    pub default_role: Option<ColumnRole>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: impl Into<String>, role: ColumnRole) -> Self {
        self.roles.push((column.into(), role));
        self
    }

    pub fn with_default(mut self, role: ColumnRole) -> Self {
        self.default_role = Some(role);
        self
    }

    fn resolve(&self, header: &[String]) -> Result<Vec<ColumnRole>> {
        let mut explicit = std::collections::HashMap::new();
        for (name, role) in &self.roles {
            if explicit.insert(name.as_str(), *role).is_some() {
                return Err(Error::validation(format!(
                    "schema assigns column `{name}` more than once"
                )));
            }
            if !header.iter().any(|h| h == name) {
                return Err(Error::validation(format!(
                    "schema names column `{name}` which is not in the header"
                )));
            }
        }
        let roles = header
            .iter()
            .map(|h| {
                explicit
                    .get(h.as_str())
                    .copied()
                    .or(self.default_role)
                    .ok_or_else(|| Error::validation(format!("column `{h}` has no role in the schema")))
            })
            .collect::<Result<Vec<_>>>()?;
        if roles.iter().filter(|r| **r == ColumnRole::Id).count() > 1 {
            return Err(Error::validation("schema assigns more than one id column"));
        }
        if !roles.contains(&ColumnRole::Cause) {
            return Err(Error::validation("schema selects no cause columns"));
        }
        Ok(roles)
    }
}

fn is_missing_cell(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA"
}

/// Reads a header-first UTF-8 CSV file according to `schema`.
///
/// Empty cells and `NA` are accepted as missing in cause columns only.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

/// Like [`load_csv`] but reads from any reader.
pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let roles = schema.resolve(&header)?;
    let idx = |role: ColumnRole| -> Vec<usize> { (0..header.len()).filter(|&k| roles[k] == role).collect() };
    let cause_cols = idx(ColumnRole::Cause);
    let outcome_cols = idx(ColumnRole::Outcome);
    let covariate_cols = idx(ColumnRole::Covariate);
    let id_col = idx(ColumnRole::Id).first().copied();

    let mut cause_vals = Vec::new();
    let mut missing = Vec::new();
    let mut outcomes: Vec<Vec<f64>> = vec![Vec::new(); outcome_cols.len()];
    let mut covariates = Vec::new();
    let mut ids = Vec::new();
    let mut seen_ids = HashSet::new();

    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = ids.len() + 1;
        let parse = |k: usize| -> Result<Option<f64>> {
            let cell = record.get(k).unwrap_or("");
            if is_missing_cell(cell) {
                return Ok(None);
            }
            cell.trim().parse::<f64>().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: `{cell}` is not a number", header[k]),
            })
        };
        for &k in &cause_cols {
            match parse(k)? {
                Some(v) => {
                    cause_vals.push(v);
                    missing.push(false);
                }
                None => {
                    cause_vals.push(f64::NAN);
                    missing.push(true);
                }
            }
        }
        for (slot, &k) in outcome_cols.iter().enumerate() {
            let v = parse(k)?.ok_or_else(|| {
                Error::validation(format!(
                    "outcome column `{}` is empty at row {row} (line {line})",
                    header[k]
                ))
            })?;
            outcomes[slot].push(v);
        }
        for &k in &covariate_cols {
            let v = parse(k)?.ok_or_else(|| {
                Error::validation(format!(
                    "covariate column `{}` is empty at row {row} (line {line})",
                    header[k]
                ))
            })?;
            covariates.push(v);
        }
        let id = match id_col {
            Some(k) => record.get(k).unwrap_or("").trim().to_string(),
            None => row.to_string(),
        };
        if !seen_ids.insert(id.clone()) {
            return Err(Error::validation(format!(
                "duplicate unit id `{id}` at row {row} (line {line})"
            )));
        }
        ids.push(id);
    }

    let n = ids.len();
    let names = |cols: &[usize]| cols.iter().map(|&k| header[k].clone()).collect::<Vec<_>>();
    let causes = CauseMatrix::with_missing(
        DMatrix::from_row_slice(n, cause_cols.len(), &cause_vals),
        missing,
        names(&cause_cols),
        ids,
    )?;
    let outcomes = outcome_cols
        .iter()
        .zip(outcomes)
        .map(|(&k, v)| OutcomeVector::new(header[k].clone(), OutcomeKind::from_name(&header[k]), v))
        .collect::<Result<Vec<_>>>()?;
    let covariates = if covariate_cols.is_empty() {
        None
    } else {
        Some(CovariateMatrix::new(
            DMatrix::from_row_slice(n, covariate_cols.len(), &covariates),
            names(&covariate_cols),
        )?)
    };
    Ok(Dataset {
        causes,
        outcomes,
        covariates,
    })
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

/// Writes the dataset as CSV: `id`, causes, outcomes, covariates.
/// Missing cause cells are written as empty strings.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv_to(file, data)
}

pub fn write_csv_to<W: std::io::Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let m = &data.causes;
    let mut header = vec!["id".to_string()];
    header.extend(m.column_names().iter().cloned());
    header.extend(data.outcomes.iter().map(|o| o.name.clone()));
    if let Some(x) = &data.covariates {
        header.extend(x.names.iter().cloned());
    }
    let io = |e: csv::Error| Error::Io {
        path: "csv output".into(),
        source: std::io::Error::other(e),
    };
    wtr.write_record(&header).map_err(io)?;
    for i in 0..m.n_units() {
        let mut row = vec![m.unit_ids()[i].clone()];
        for j in 0..m.n_causes() {
            row.push(m.get(i, j).map(|v| v.to_string()).unwrap_or_default());
        }
        for o in &data.outcomes {
            row.push(o.values()[i].to_string());
        }
        if let Some(x) = &data.covariates {
            for k in 0..x.n_covariates() {
                row.push(x.values()[(i, k)].to_string());
            }
        }
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "csv output".into(),
        source,
    })?;
    Ok(())
}

/// Column-wise affine transform `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, m: &CauseMatrix) -> Result<CauseMatrix> {
        self.check_width(m)?;
        let v = DMatrix::from_fn(m.n_units(), m.n_causes(), |i, j| {
            (m.values()[(i, j)] - self.mean[j]) / self.scale[j]
        });
        CauseMatrix::with_missing(
            v,
            m.missing_mask().to_vec(),
            m.column_names().to_vec(),
            m.unit_ids().to_vec(),
        )
    }

    pub fn invert(&self, m: &CauseMatrix) -> Result<CauseMatrix> {
        self.check_width(m)?;
        let v = DMatrix::from_fn(m.n_units(), m.n_causes(), |i, j| {
            m.values()[(i, j)] * self.scale[j] + self.mean[j]
        });
        CauseMatrix::with_missing(
            v,
            m.missing_mask().to_vec(),
            m.column_names().to_vec(),
            m.unit_ids().to_vec(),
        )
    }

    fn check_width(&self, m: &CauseMatrix) -> Result<()> {
        if m.n_causes() != self.mean.len() {
            return Err(Error::validation(format!(
                "standardization has {} columns, matrix has {}",
                self.mean.len(),
                m.n_causes()
            )));
        }
        Ok(())
    }
}

/// Sample mean and (n - 1) standard deviation of a slice.
pub fn mean_and_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    let mean = sum / n as f64;
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n as f64 - 1.0)).sqrt())
}

/// Centers each column and scales it to unit sample standard deviation.
pub fn standardize(m: &CauseMatrix) -> Result<(CauseMatrix, Standardization)> {
    m.require_complete("standardize")?;
    let mut mean = Vec::with_capacity(m.n_causes());
    let mut scale = Vec::with_capacity(m.n_causes());
    for j in 0..m.n_causes() {
        let (mu, sd) = mean_and_sd(m.values().column(j).iter().copied());
        if sd.is_nan() || sd <= 0.0 {
            return Err(Error::validation(format!(
                "cause column `{}` has zero variance and cannot be standardized",
                m.column_names()[j]
            )));
        }
        mean.push(mu);
        scale.push(sd);
    }
    let st = Standardization { mean, scale };
    let mut out = st.apply(m)?;
    // second centering pass removes the rounding residue of the first
    let mut v = out.values().clone();
    for j in 0..v.ncols() {
        let mu = v.column(j).mean();
        v.column_mut(j).add_scalar_mut(-mu);
    }
    out = out.replace_values(v)?;
    Ok((out, st))
}

/// Pearson correlation matrix of the columns of `values`.
/// Zero-variance columns correlate 0 with everything else.
pub fn correlation_matrix(values: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = values.shape();
    let mut centered = values.clone();
    for j in 0..d {
        let mu = centered.column(j).mean();
        centered.column_mut(j).add_scalar_mut(-mu);
    }
    let norms: Vec<f64> = (0..d).map(|j| centered.column(j).norm()).collect();
    let _ = n;
    DMatrix::from_fn(d, d, |a, b| {
        if a == b {
            1.0
        } else if norms[a] == 0.0 || norms[b] == 0.0 {
            0.0
        } else {
            (centered.column(a).dot(&centered.column(b)) / (norms[a] * norms[b])).clamp(-1.0, 1.0)
        }
    })
}

/// Result of [`correlation_screen`].
#[derive(Debug, Clone, PartialEq)]
pub struct Screening {
    pub matrix: CauseMatrix,
    /// Dropped column names, in elimination order.
    pub dropped: Vec<String>,
}

/// Greedily drops causes until no pair has `|ρ| > threshold`.
///
/// Each round takes the most correlated remaining pair and drops the member
/// with the larger mean absolute correlation to the other remaining columns;
/// ties drop the later column.
pub fn correlation_screen(m: &CauseMatrix, threshold: f64) -> Result<Screening> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::validation(format!(
            "correlation threshold must lie in (0, 1), got {threshold}"
        )));
    }
    m.require_complete("correlation screening")?;
    let corr = correlation_matrix(m.values());
    let mut keep: Vec<usize> = (0..m.n_causes()).collect();
    let mut dropped = Vec::new();
    loop {
        let mut worst: Option<(usize, usize, f64)> = None;
        for (x, &a) in keep.iter().enumerate() {
            for &b in &keep[x + 1..] {
                let r = corr[(a, b)].abs();
                if r > threshold && worst.is_none_or(|(_, _, w)| r > w) {
                    worst = Some((a, b, r));
                }
            }
        }
        let Some((a, b, _)) = worst else { break };
        let mean_abs = |c: usize| {
            let others: Vec<f64> = keep.iter().filter(|&&o| o != c).map(|&o| corr[(c, o)].abs()).collect();
            others.iter().sum::<f64>() / others.len() as f64
        };
        let (ma, mb) = (mean_abs(a), mean_abs(b));
        // a precedes b in input order
        let drop = if (ma - mb).abs() <= 1e-12 {
            b
        } else if ma > mb {
            a
        } else {
            b
        };
        keep.retain(|&c| c != drop);
        dropped.push(m.column_names()[drop].clone());
    }
    Ok(Screening {
        matrix: m.select_columns(&keep)?,
        dropped,
    })
}

/// Which cause entries are hidden from model fitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutMask {
    n_rows: usize,
    n_cols: usize,
    /// Row-major; `true` = held out.
    held: Vec<bool>,
}

impl HoldoutMask {
    /// A mask holding nothing.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        HoldoutMask {
            n_rows,
            n_cols,
            held: vec![false; n_rows * n_cols],
        }
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, held: Vec<bool>) -> Result<Self> {
        if held.len() != n_rows * n_cols {
            return Err(Error::validation("holdout mask has the wrong size"));
        }
        Ok(HoldoutMask { n_rows, n_cols, held })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_held(&self, i: usize, j: usize) -> bool {
        self.held[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, held: bool) {
        self.held[i * self.n_cols + j] = held;
    }

    pub fn held_in_row(&self, i: usize) -> Vec<usize> {
        (0..self.n_cols).filter(|&j| self.is_held(i, j)).collect()
    }

    pub fn observed_in_row(&self, i: usize) -> Vec<usize> {
        (0..self.n_cols).filter(|&j| !self.is_held(i, j)).collect()
    }

    pub fn held_count(&self) -> usize {
        self.held.iter().filter(|&&h| h).count()
    }

    pub fn fraction_held(&self) -> f64 {
        self.held_count() as f64 / self.held.len() as f64
    }

    pub(crate) fn check_shape(&self, m: &CauseMatrix) -> Result<()> {
        if self.n_rows != m.n_units() || self.n_cols != m.n_causes() {
            return Err(Error::validation(format!(
                "holdout mask is {}x{} but the cause matrix is {}x{}",
                self.n_rows,
                self.n_cols,
                m.n_units(),
                m.n_causes()
            )));
        }
        Ok(())
    }
}

/// Hides `floor(rate * D)` entries per row (at least 1, at most D - 1),
/// sampled without replacement.
pub fn make_holdout(m: &CauseMatrix, rate: f64, seed: u64) -> Result<HoldoutMask> {
    m.require_complete("holdout masking")?;
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::validation(format!(
            "holdout rate must lie in (0, 1), got {rate}"
        )));
    }
    let (n, d) = (m.n_units(), m.n_causes());
    if d < 2 {
        return Err(Error::validation(
            "holdout needs at least 2 causes: with a single cause every row would lose its only observed entry",
        ));
    }
    let per_row = ((rate * d as f64).floor() as usize).clamp(1, d - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = HoldoutMask::empty(n, d);
    for i in 0..n {
        for j in rand::seq::index::sample(&mut rng, d, per_row) {
            mask.set(i, j, true);
        }
    }
    Ok(mask)
}

/// Per-row overlap diagnostic: does each unit have a strictly positive cause?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub row_passes: Vec<bool>,
    /// Zero-based indices of failing rows.
    pub failing_rows: Vec<usize>,
    pub passed: bool,
}

pub fn check_overlap(m: &CauseMatrix) -> OverlapReport {
    let row_passes: Vec<bool> = (0..m.n_units())
        .map(|i| (0..m.n_causes()).any(|j| m.get(i, j).is_some_and(|v| v > 0.0)))
        .collect();
    let failing_rows: Vec<usize> = row_passes
        .iter()
        .enumerate()
        .filter(|(_, p)| !**p)
        .map(|(i, _)| i)
        .collect();
    OverlapReport {
        passed: failing_rows.is_empty(),
        row_passes,
        failing_rows,
    }
}
