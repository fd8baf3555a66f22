use std::fmt;

use deconfounder::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_GATE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// A failure tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub enum CliError {
    Stage {
        stage: &'static str,
        source: Error,
    },
    /// The predictive check rejected the assignment model.
    Gate {
        score: f64,
        threshold: f64,
    },
    Usage(String),
}

impl CliError {
    pub fn stage(stage: &'static str) -> impl FnOnce(Error) -> CliError {
        move |source| CliError::Stage { stage, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage {
                source: Error::RankDeficient { .. } | Error::Numeric(_),
                ..
            } => EXIT_NUMERIC,
            CliError::Stage { .. } | CliError::Usage(_) => EXIT_INPUT,
            CliError::Gate { .. } => EXIT_GATE,
        }
    }

    pub fn hint(&self) -> &'static str {
        match self {
            CliError::Gate { .. } => {
                "the factor model does not fit the causes; try another --latent-dim, or pass --force to estimate anyway"
            }
            CliError::Usage(_) => "see --help",
            CliError::Stage { stage, source } => match (source, *stage) {
                (Error::Io { .. }, _) => "check that the path exists and is readable/writable",
                (Error::Parse { .. }, _) => "fix the CSV at the reported line; missing cause cells may be empty or NA",
                (Error::RankDeficient { .. }, _) => {
                    "drop or merge the listed columns, or lower --corr-threshold to screen them out"
                }
                (Error::Validation(_), "holdout") => "the predictive check needs at least 2 causes per unit",
                (Error::Validation(_), "ppca") => "--latent-dim must be smaller than the number of screened causes",
                (Error::Validation(_), "load") => {
                    "map every CSV column with --id, --outcome, --covariate or --ignore; the rest are causes"
                }
                (Error::Validation(_), _) => "check the input data and flag values",
                (Error::Numeric(_), "ppca") => "reduce --latent-dim or remove near-constant causes",
                (Error::Numeric(_), _) => "inspect the inputs for degenerate or extreme values",
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Stage { stage, source } => write!(f, "[{stage}] {source}"),
            CliError::Gate { score, threshold } => {
                write!(
                    f,
                    "[check] predictive score {score:.4} does not exceed the threshold {threshold}"
                )
            }
            CliError::Usage(msg) => write!(f, "[cli] {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        let v = CliError::stage("load")(Error::Validation("x".into()));
        assert_eq!(v.exit_code(), EXIT_INPUT);
        assert!(v.to_string().starts_with("[load]"));
        let r = CliError::stage("effects")(Error::RankDeficient {
            condition: 1e12,
            columns: vec!["a".into()],
        });
        assert_eq!(r.exit_code(), EXIT_NUMERIC);
        assert_eq!(
            CliError::Gate {
                score: 0.05,
                threshold: 0.1
            }
            .exit_code(),
            EXIT_GATE
        );
    }
}
