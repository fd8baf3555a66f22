//! Multi-cause effect estimation with surrogate confounders.
//!
//! The pipeline: impute missing cause scores, screen highly correlated
//! causes, fit a probabilistic PCA assignment model and validate it with a
//! held-out predictive check, infer per-unit surrogate confounders, then
//! regress outcomes on causes plus surrogates. Mediation analysis and
//! one-by-one cause-addition sweeps build on the same regressions, and a
//! synthetic generator with planted ground truth backs the test suites.

pub mod dataset;
pub mod effects;
pub mod error;
pub mod imputation;
mod linalg;
pub mod mediation;
pub mod ppca;
pub mod robustness;
pub mod stats;
pub mod synthetic;

pub use dataset::{
    check_overlap, correlation_screen, load_csv, make_holdout, read_csv, standardize, write_csv, write_csv_to,
    CauseMatrix, ColumnRole, CovariateMatrix, Dataset, HoldoutMask, OutcomeKind, OutcomeVector, Schema,
    Standardization,
};
pub use effects::{
    contrast, estimate_effects_causal, estimate_effects_noncausal, ols_fit, predictive_comparison,
    CausalEffectEstimate, RegressionReport, Significance,
};
pub use error::{Error, Result};
pub use imputation::{impute_mice, Imputation, MiceConfig};
pub use linalg::MAX_CONDITION;
pub use mediation::{mediate, MediationReport, MediationStatus};
pub use ppca::{
    closed_form_ppca, fit_ppca, fit_ppca_masked, posterior_mean, posterior_mean_partial, predictive_check, Aggregation,
    CheckConfig, FitConfig, PpcaModel, PredictiveCheckResult, SurrogateConfounders,
};
pub use robustness::{sweep, SweepMode, SweepTable};
pub use synthetic::{generate, SyntheticConfig, SyntheticDataset, SyntheticTruth};
