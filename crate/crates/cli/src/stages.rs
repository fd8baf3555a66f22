//! Pipeline stages shared by the subcommands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use deconfounder::ppca::Aggregation;
use deconfounder::{
    check_overlap, correlation_screen, fit_ppca_masked, impute_mice, load_csv, make_holdout, posterior_mean_partial,
    predictive_check, standardize, write_csv_to, CauseMatrix, CheckConfig, ColumnRole, Dataset, FitConfig, HoldoutMask,
    MiceConfig, OutcomeKind, PpcaModel, PredictiveCheckResult, Schema, Standardization, SurrogateConfounders,
};

use crate::error::{CliError, CliResult};
use crate::manifest::InputRecord;

/// Input file and column roles. Unlisted columns are causes.
#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Input CSV (header row required)
    #[arg(long)]
    #[serde(skip)]
    pub input: PathBuf,
    /// Unit id column
    #[arg(long)]
    pub id: Option<String>,
    /// Extra outcome columns to load (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub outcomes: Vec<String>,
    /// Covariate columns (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Columns to skip (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub ignore: Vec<String>,
}

impl InputArgs {
    /// Loads the CSV; `targets` are outcome columns the command needs.
    pub fn load(&self, targets: &[&str]) -> CliResult<(Dataset, InputRecord)> {
        let record = InputRecord::read("data", &self.input)?;
        let mut schema = Schema::new().with_default(ColumnRole::Cause);
        if let Some(id) = &self.id {
            schema = schema.with(id.clone(), ColumnRole::Id);
        }
        let mut outcomes: Vec<&str> = self.outcomes.iter().map(String::as_str).collect();
        for t in targets {
            if !outcomes.contains(t) {
                outcomes.push(t);
            }
        }
        for o in outcomes {
            schema = schema.with(o, ColumnRole::Outcome);
        }
        for c in &self.covariates {
            schema = schema.with(c.clone(), ColumnRole::Covariate);
        }
        for c in &self.ignore {
            schema = schema.with(c.clone(), ColumnRole::Ignore);
        }
        let data = load_csv(&self.input, &schema).map_err(CliError::stage("load"))?;
        Ok((data, record))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrepArgs {
    /// Drop causes until no pair has |correlation| above this
    #[arg(long, default_value_t = 0.7)]
    pub corr_threshold: f64,
    /// Maximum MICE sweeps when causes have missing cells
    #[arg(long, default_value_t = 10)]
    pub mice_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationArg {
    PerUnit,
    Pooled,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::PerUnit => Aggregation::PerUnit,
            AggregationArg::Pooled => Aggregation::Pooled,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Latent dimension (default: 10 for rating outcomes, 5 otherwise)
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Fraction of causes held out per unit for the predictive check
    #[arg(long, default_value_t = 0.2)]
    pub holdout_rate: f64,
    /// Replicated datasets per unit in the predictive check
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    /// Posterior draws per unit in the predictive check
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Predictive score the model must exceed
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = AggregationArg::PerUnit)]
    pub aggregation: AggregationArg,
    /// Estimate effects even when the predictive check fails
    #[arg(long)]
    pub force: bool,
}

impl ModelArgs {
    pub fn latent_dim_for(&self, kind: OutcomeKind) -> usize {
        self.latent_dim.unwrap_or(match kind {
            OutcomeKind::Rating => 10,
            OutcomeKind::Popularity | OutcomeKind::Custom => 5,
        })
    }

    pub fn check_config(&self, seed: u64) -> CheckConfig {
        CheckConfig {
            replications: self.replications,
            samples: self.samples,
            threshold: self.threshold,
            seed,
            aggregation: self.aggregation.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PrepSummary {
    pub n_units: usize,
    pub input_causes: Vec<String>,
    pub imputed_cells: usize,
    pub mice_sweeps: usize,
    pub mice_converged: bool,
    pub mice_fallback_columns: Vec<String>,
    /// Units with no strictly positive cause before standardization.
    pub overlap_failing_units: usize,
    pub standardization: Standardization,
    pub dropped_by_screen: Vec<String>,
    pub causes_used: Vec<String>,
}

pub struct Prepared {
    pub data: Dataset,
    /// Imputed, standardized and screened.
    pub causes: CauseMatrix,
    pub summary: PrepSummary,
}

/// Impute, standardize and correlation-screen the causes.
pub fn prepare(data: Dataset, prep: &PrepArgs, seed: u64) -> CliResult<Prepared> {
    let raw = &data.causes;
    let imputed_cells = raw.missing_count();
    let (complete, sweeps, converged, fallback) = if raw.has_missing() {
        let cfg = MiceConfig {
            iterations: prep.mice_iterations,
            seed,
            ..MiceConfig::default()
        };
        let imp = impute_mice(raw, &cfg).map_err(CliError::stage("impute"))?;
        (imp.matrix, imp.sweeps, imp.converged, imp.fallback_columns)
    } else {
        (raw.clone(), 0, true, Vec::new())
    };
    let overlap = check_overlap(&complete);
    let (standardized, standardization) = standardize(&complete).map_err(CliError::stage("standardize"))?;
    let screening = correlation_screen(&standardized, prep.corr_threshold).map_err(CliError::stage("screen"))?;
    let summary = PrepSummary {
        n_units: raw.n_units(),
        input_causes: raw.column_names().to_vec(),
        imputed_cells,
        mice_sweeps: sweeps,
        mice_converged: converged,
        mice_fallback_columns: fallback,
        overlap_failing_units: overlap.failing_rows.len(),
        standardization,
        dropped_by_screen: screening.dropped,
        causes_used: screening.matrix.column_names().to_vec(),
    };
    Ok(Prepared {
        data,
        causes: screening.matrix,
        summary,
    })
}

pub struct Surrogates {
    pub mask: HoldoutMask,
    pub model: PpcaModel,
    pub check: PredictiveCheckResult,
    pub z: SurrogateConfounders,
}

/// Holdout mask, masked PPCA fit, predictive check and per-unit posteriors.
pub fn infer_surrogates(
    causes: &CauseMatrix,
    latent_dim: usize,
    model: &ModelArgs,
    seed: u64,
) -> CliResult<Surrogates> {
    let mask = make_holdout(causes, model.holdout_rate, seed).map_err(CliError::stage("holdout"))?;
    let fit = fit_ppca_masked(
        causes,
        &mask,
        latent_dim,
        &FitConfig {
            seed,
            ..FitConfig::default()
        },
    )
    .map_err(CliError::stage("ppca"))?;
    let check = predictive_check(&fit, causes, &mask, &model.check_config(seed)).map_err(CliError::stage("check"))?;
    let z = posterior_mean_partial(&fit, causes, &mask).map_err(CliError::stage("posterior"))?;
    Ok(Surrogates {
        mask,
        model: fit,
        check,
        z,
    })
}

/// `Ok(warning)` when the check passed or `force` overrides it.
pub fn gate(check: &PredictiveCheckResult, force: bool) -> CliResult<Option<String>> {
    if check.passed {
        Ok(None)
    } else if force {
        Ok(Some(format!(
            "WARNING: predictive check failed (score {:.4} <= {}); effects estimated anyway because of --force",
            check.score, check.threshold
        )))
    } else {
        Err(CliError::Gate {
            score: check.score,
            threshold: check.threshold,
        })
    }
}

/// `id,z1..zK` as CSV text.
pub fn confounders_csv(ids: &[String], z: &SurrogateConfounders) -> CliResult<Vec<u8>> {
    let missing = vec![false; z.values.len()];
    let m = CauseMatrix::with_missing(z.values.clone(), missing, z.names(), ids.to_vec())
        .map_err(CliError::stage("output"))?;
    let data = Dataset {
        causes: m,
        outcomes: Vec::new(),
        covariates: None,
    };
    let mut buf = Vec::new();
    write_csv_to(&mut buf, &data).map_err(CliError::stage("output"))?;
    Ok(buf)
}
