//! Subcommand definitions and their drivers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use deconfounder::robustness::random_order;
use deconfounder::{
    estimate_effects_causal, estimate_effects_noncausal, fit_ppca_masked, generate, impute_mice, load_csv,
    make_holdout, mediate, predictive_check, predictive_comparison, sweep, write_csv, write_csv_to,
    CausalEffectEstimate, ColumnRole, Dataset, Error, FitConfig, HoldoutMask, MiceConfig, OutcomeVector, PpcaModel,
    PredictiveCheckResult, Schema, SyntheticConfig,
};

use crate::error::{CliError, CliResult};
use crate::manifest::{InputRecord, Manifest, OutputDir};
use crate::scenarios::Scenario;
use crate::stages::{
    confounders_csv, gate, infer_surrogates, prepare, AggregationArg, InputArgs, ModelArgs, PrepArgs, PrepSummary,
    Prepared, Surrogates,
};

#[derive(Debug, Parser)]
#[command(
    name = "deconfounder",
    version,
    about = "Multi-cause effect estimation with surrogate confounders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a ground-truth sidecar
    Synth(SynthArgs),
    /// Fill missing cause cells by chained regressions
    Impute(ImputeArgs),
    /// Fit the factor model on a holdout-masked cause matrix
    FitPpca(FitArgs),
    /// Run the held-out predictive check for a saved model and mask
    Check(CheckArgs),
    /// Full pipeline: causal and non-causal effect tables
    Effects(EffectsArgs),
    /// Four-step mediation with the rating as mediator
    Mediate(MediateArgs),
    /// Add causes one at a time and report sign flips
    Robustness(RobustnessArgs),
    /// Train/test error of the causal and non-causal outcome models
    ComparePredictive(CompareArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Output directory
    #[arg(long, env = "DECONFOUNDER_OUT_DIR", default_value = "out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

/// What a successful run leaves behind.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest_sha256: String,
    /// Text printed to stdout (usually `report.txt`).
    pub summary: String,
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Synth(a) => run_synth(a),
        Command::Impute(a) => run_impute(a),
        Command::FitPpca(a) => run_fit(a),
        Command::Check(a) => run_check(a),
        Command::Effects(a) => run_effects_pipeline(a),
        Command::Mediate(a) => run_mediate(a),
        Command::Robustness(a) => run_robustness(a),
        Command::ComparePredictive(a) => run_compare(a),
    }
}

#[derive(Serialize)]
struct Resolved<'a, A: Serialize> {
    #[serde(flatten)]
    args: &'a A,
    latent_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
struct CheckSummary {
    score: f64,
    threshold: f64,
    passed: bool,
    replications: usize,
    mc_samples: usize,
    aggregation: deconfounder::Aggregation,
}

impl From<&PredictiveCheckResult> for CheckSummary {
    fn from(c: &PredictiveCheckResult) -> Self {
        CheckSummary {
            score: c.score,
            threshold: c.threshold,
            passed: c.passed,
            replications: c.replications,
            mc_samples: c.mc_samples,
            aggregation: c.aggregation,
        }
    }
}

fn check_line(c: &PredictiveCheckResult) -> String {
    format!(
        "predictive check: score {:.4} vs threshold {} ({}; B = {}, S = {})",
        c.score,
        c.threshold,
        if c.passed { "passed" } else { "FAILED" },
        c.replications,
        c.mc_samples
    )
}

fn report_header(command: &str, out: &OutputDir, prep: &PrepSummary) -> String {
    let mut s = String::new();
    writeln!(s, "deconfounder {command}").unwrap();
    writeln!(s, "manifest sha256: {}", out.manifest_sha256).unwrap();
    writeln!(
        s,
        "units: {}; causes used: {}",
        prep.n_units,
        prep.causes_used.join(", ")
    )
    .unwrap();
    let dropped = if prep.dropped_by_screen.is_empty() {
        "none".to_string()
    } else {
        prep.dropped_by_screen.join(", ")
    };
    writeln!(s, "dropped by correlation screen: {dropped}").unwrap();
    if prep.imputed_cells > 0 {
        writeln!(s, "imputed cells: {} ({} sweeps)", prep.imputed_cells, prep.mice_sweeps).unwrap();
    }
    if prep.overlap_failing_units > 0 {
        writeln!(
            s,
            "overlap: {} units have no positive cause",
            prep.overlap_failing_units
        )
        .unwrap();
    }
    s
}

fn prepared_causes_csv(prep: &Prepared) -> CliResult<Vec<u8>> {
    let data = Dataset {
        causes: prep.causes.clone(),
        outcomes: Vec::new(),
        covariates: None,
    };
    let mut buf = Vec::new();
    write_csv_to(&mut buf, &data).map_err(CliError::stage("output"))?;
    Ok(buf)
}

fn outcome(data: &Dataset, name: &str) -> CliResult<OutcomeVector> {
    data.outcome(name).cloned().map_err(CliError::stage("load"))
}

/// Writes the surrogate-stage artifacts and applies the gate. On gate
/// failure a short report is written before the error is returned.
fn surrogate_stage(
    command: &str,
    out: &OutputDir,
    prep: &Prepared,
    latent_dim: usize,
    model: &ModelArgs,
    seed: u64,
) -> CliResult<(Surrogates, Option<String>)> {
    out.write_bytes("causes.csv", &prepared_causes_csv(prep)?)?;
    let s = infer_surrogates(&prep.causes, latent_dim, model, seed)?;
    out.write_json("model.json", &s.model)?;
    out.write_json("mask.json", &s.mask)?;
    out.write_json("check.json", &s.check)?;
    out.write_bytes("confounders.csv", &confounders_csv(prep.causes.unit_ids(), &s.z)?)?;
    match gate(&s.check, model.force) {
        Ok(warning) => {
            if let Some(w) = &warning {
                eprintln!("{w}");
            }
            Ok((s, warning))
        }
        Err(e) => {
            let mut text = report_header(command, out, &prep.summary);
            writeln!(text, "{}", check_line(&s.check)).unwrap();
            writeln!(
                text,
                "effects not estimated: the assignment model failed the predictive check"
            )
            .unwrap();
            out.write_text("report.txt", &text)?;
            out.write_json(
                "report.json",
                &serde_json::json!({
                    "manifest_sha256": out.manifest_sha256,
                    "command": command,
                    "latent_dim": latent_dim,
                    "preprocessing": prep.summary,
                    "predictive_check": CheckSummary::from(&s.check),
                    "error": e.to_string(),
                }),
            )?;
            Err(e)
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EffectsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Outcome column to explain
    #[arg(long)]
    pub outcome: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub prep: PrepArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct EffectsReport<'a> {
    manifest_sha256: &'a str,
    command: &'static str,
    outcome: &'a str,
    latent_dim: usize,
    preprocessing: &'a PrepSummary,
    predictive_check: CheckSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    causal: &'a CausalEffectEstimate,
    noncausal: &'a CausalEffectEstimate,
}

/// load → impute → standardize → screen → holdout → PPCA → check (gate) →
/// posterior surrogates → causal and non-causal regressions.
pub fn run_effects_pipeline(args: &EffectsArgs) -> CliResult<Outcome> {
    let (data, record) = args.input.load(&[&args.outcome])?;
    let y = outcome(&data, &args.outcome)?;
    let latent_dim = args.model.latent_dim_for(y.kind);
    let out = OutputDir::create(
        &args.out.out_dir,
        &Manifest::new("effects", vec![record], Resolved { args, latent_dim }),
    )?;
    let prep = prepare(data, &args.prep, args.seed)?;
    let (s, warning) = surrogate_stage("effects", &out, &prep, latent_dim, &args.model, args.seed)?;
    let covariates = prep.data.covariates.as_ref();
    let causal = estimate_effects_causal(&prep.causes, &s.z, &y, covariates).map_err(CliError::stage("effects"))?;
    let noncausal = estimate_effects_noncausal(&prep.causes, &y, covariates).map_err(CliError::stage("effects"))?;

    let mut text = report_header("effects", &out, &prep.summary);
    writeln!(text, "outcome: {}; latent dimension: {latent_dim}", y.name).unwrap();
    writeln!(text, "{}", check_line(&s.check)).unwrap();
    if let Some(w) = &warning {
        writeln!(text, "{w}").unwrap();
    }
    writeln!(text, "\nCausal model").unwrap();
    text.push_str(&causal.render(&y.name));
    writeln!(text, "\nNon-causal model").unwrap();
    text.push_str(&noncausal.render(&y.name));
    out.write_text("report.txt", &text)?;
    out.write_json(
        "report.json",
        &EffectsReport {
            manifest_sha256: &out.manifest_sha256,
            command: "effects",
            outcome: &y.name,
            latent_dim,
            preprocessing: &prep.summary,
            predictive_check: CheckSummary::from(&s.check),
            warning,
            causal: &causal,
            noncausal: &noncausal,
        },
    )?;
    Ok(Outcome {
        out_dir: out.path.clone(),
        manifest_sha256: out.manifest_sha256,
        summary: text,
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MediateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Mediator column
    #[arg(long, default_value = "rating")]
    pub mediator: String,
    /// Outcome column
    #[arg(long, default_value = "popularity")]
    pub outcome: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub prep: PrepArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

pub fn run_mediate(args: &MediateArgs) -> CliResult<Outcome> {
    let (data, record) = args.input.load(&[&args.mediator, &args.outcome])?;
    let r = outcome(&data, &args.mediator)?;
    let y = outcome(&data, &args.outcome)?;
    let latent_dim = args.model.latent_dim_for(y.kind);
    let out = OutputDir::create(
        &args.out.out_dir,
        &Manifest::new("mediate", vec![record], Resolved { args, latent_dim }),
    )?;
    let prep = prepare(data, &args.prep, args.seed)?;
    let (s, warning) = surrogate_stage("mediate", &out, &prep, latent_dim, &args.model, args.seed)?;
    let report = mediate(&prep.causes, &s.z, &r, &y).map_err(CliError::stage("mediate"))?;

    let mut text = report_header("mediate", &out, &prep.summary);
    writeln!(
        text,
        "mediator: {}; outcome: {}; latent dimension: {latent_dim}",
        r.name, y.name
    )
    .unwrap();
    writeln!(text, "{}", check_line(&s.check)).unwrap();
    if let Some(w) = &warning {
        writeln!(text, "{w}").unwrap();
    }
    writeln!(text).unwrap();
    text.push_str(&report.render());
    writeln!(text, "\nPer-cause status").unwrap();
    let width = report.cause_names.iter().map(String::len).max().unwrap_or(0);
    for (name, status) in report.cause_names.iter().zip(&report.status) {
        let label = serde_json::to_value(status).unwrap();
        writeln!(text, "{name:<width$}  {}", label.as_str().unwrap_or_default()).unwrap();
    }
    out.write_text("report.txt", &text)?;
    out.write_json(
        "report.json",
        &serde_json::json!({
            "manifest_sha256": out.manifest_sha256,
            "command": "mediate",
            "latent_dim": latent_dim,
            "preprocessing": prep.summary,
            "predictive_check": CheckSummary::from(&s.check),
            "warning": warning,
            "mediation": report,
        }),
    )?;
    Ok(Outcome {
        out_dir: out.path.clone(),
        manifest_sha256: out.manifest_sha256,
        summary: text,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Causal,
    Noncausal,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RobustnessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub outcome: String,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Addition order (comma separated); defaults to input order
    #[arg(long, value_delimiter = ',', conflicts_with = "shuffle_seed")]
    pub order: Vec<String>,
    /// Use a seeded random addition order
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub prep: PrepArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

pub fn run_robustness(args: &RobustnessArgs) -> CliResult<Outcome> {
    let (data, record) = args.input.load(&[&args.outcome])?;
    let y = outcome(&data, &args.outcome)?;
    let latent_dim = args.model.latent_dim_for(y.kind);
    let out = OutputDir::create(
        &args.out.out_dir,
        &Manifest::new("robustness", vec![record], Resolved { args, latent_dim }),
    )?;
    let prep = prepare(data, &args.prep, args.seed)?;
    let names = prep.causes.column_names().to_vec();
    let order = match (&args.order[..], args.shuffle_seed) {
        ([], Some(s)) => random_order(&names, s),
        ([], None) => names,
        (given, _) => given.to_vec(),
    };
    let mut text = report_header("robustness", &out, &prep.summary);
    let surrogates = match args.mode {
        ModeArg::Causal => {
            let (s, warning) = surrogate_stage("robustness", &out, &prep, latent_dim, &args.model, args.seed)?;
            writeln!(text, "{}", check_line(&s.check)).unwrap();
            if let Some(w) = &warning {
                writeln!(text, "{w}").unwrap();
            }
            Some(s)
        }
        ModeArg::Noncausal => None,
    };
    let table =
        sweep(&prep.causes, surrogates.as_ref().map(|s| &s.z), &y, &order).map_err(CliError::stage("robustness"))?;
    let mode = match args.mode {
        ModeArg::Causal => "causal",
        ModeArg::Noncausal => "non-causal",
    };
    writeln!(text, "outcome: {}; mode: {mode}\n", y.name).unwrap();
    text.push_str(&table.render());
    out.write_text("report.txt", &text)?;
    out.write_json(
        "report.json",
        &serde_json::json!({
            "manifest_sha256": out.manifest_sha256,
            "command": "robustness",
            "preprocessing": prep.summary,
            "predictive_check": surrogates.as_ref().map(|s| CheckSummary::from(&s.check)),
            "sweep": table,
        }),
    )?;
    Ok(Outcome {
        out_dir: out.path.clone(),
        manifest_sha256: out.manifest_sha256,
        summary: text,
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub outcome: String,
    /// Fraction of units used for fitting
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub prep: PrepArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

pub fn run_compare(args: &CompareArgs) -> CliResult<Outcome> {
    let (data, record) = args.input.load(&[&args.outcome])?;
    let y = outcome(&data, &args.outcome)?;
    let latent_dim = args.model.latent_dim_for(y.kind);
    let out = OutputDir::create(
        &args.out.out_dir,
        &Manifest::new("compare-predictive", vec![record], Resolved { args, latent_dim }),
    )?;
    let prep = prepare(data, &args.prep, args.seed)?;
    let (s, warning) = surrogate_stage("compare-predictive", &out, &prep, latent_dim, &args.model, args.seed)?;
    let cmp = predictive_comparison(&prep.causes, &s.z, &y, args.train_fraction, args.seed)
        .map_err(CliError::stage("compare"))?;
    let mut text = report_header("compare-predictive", &out, &prep.summary);
    writeln!(text, "{}", check_line(&s.check)).unwrap();
    if let Some(w) = &warning {
        writeln!(text, "{w}").unwrap();
    }
    writeln!(text, "train units: {}; test units: {}\n", cmp.n_train, cmp.n_test).unwrap();
    text.push_str(&cmp.render(&y.name));
    out.write_text("report.txt", &text)?;
    out.write_json(
        "report.json",
        &serde_json::json!({
            "manifest_sha256": out.manifest_sha256,
            "command": "compare-predictive",
            "outcome": y.name,
            "latent_dim": latent_dim,
            "preprocessing": prep.summary,
            "predictive_check": CheckSummary::from(&s.check),
            "comparison": cmp,
        }),
    )?;
    Ok(Outcome {
        out_dir: out.path.clone(),
        manifest_sha256: out.manifest_sha256,
        summary: text,
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 0.2)]
    pub holdout_rate: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub prep: PrepArgs,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

pub fn run_fit(args: &FitArgs) -> CliResult<Outcome> {
    let (data, record) = args.input.load(&[])?;
    let out = OutputDir::create(&args.out.out_dir, &Manifest::new("fit-ppca", vec![record], args))?;
    let prep = prepare(data, &args.prep, args.seed)?;
    out.write_bytes("causes.csv", &prepared_causes_csv(&prep)?)?;
    let mask = make_holdout(&prep.causes, args.holdout_rate, args.seed).map_err(CliError::stage("holdout"))?;
    let model = fit_ppca_masked(
        &prep.causes,
        &mask,
        args.latent_dim,
        &FitConfig {
            seed: args.seed,
            ..FitConfig::default()
        },
    )
    .map_err(CliError::stage("ppca"))?;
    out.write_json("model.json", &model)?;
    out.write_json("mask.json", &mask)?;
    let mut text = report_header("fit-ppca", &out, &prep.summary);
    writeln!(text, "latent dimension: {}", args.latent_dim).unwrap();
    writeln!(
        text,
        "held-out entries: {} ({:.3} of cells)",
        mask.held_count(),
        mask.fraction_held()
    )
    .unwrap();
    writeln!(text, "log-likelihood: {:.6}", model.log_likelihood).unwrap();
    writeln!(text, "noise variance: {:.6}", model.noise_variance).unwrap();
    writeln!(
        text,
        "EM iterations: {} ({})",
        model.fit_trace.len() - 1,
        if model.converged {
            "converged"
        } else {
            "iteration cap reached"
        }
    )
    .unwrap();
    out.write_text("report.txt", &text)?;
    out.write_json(
        "report.json",
        &serde_json::json!({
            "manifest_sha256": out.manifest_sha256,
            "command": "fit-ppca",
            "preprocessing": prep.summary,
            "log_likelihood": model.log_likelihood,
            "noise_variance": model.noise_variance,
            "iterations": model.fit_trace.len() - 1,
            "converged": model.converged,
        }),
    )?;
    Ok(Outcome {
        out_dir: out.path.clone(),
        manifest_sha256: out.manifest_sha256,
        summary: text,
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    /// Prepared cause matrix (`causes.csv` from a previous run)
    #[arg(long)]
    #[serde(skip)]
    pub causes: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub mask: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = AggregationArg::PerUnit)]
    pub aggregation: AggregationArg,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| {
        CliError::stage("load")(Error::Io {
            path: path.display().to_string(),
            source,
        })
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::stage("load")(Error::Parse {
            line: e.line() as u64,
            message: format!("{}: {e}", path.display()),
        })
    })
}

pub fn run_check(args: &CheckArgs) -> CliResult<Outcome> {
    let inputs = vec![
        InputRecord::read("causes", &args.causes)?,
        InputRecord::read("model", &args.model)?,
        InputRecord::read("mask", &args.mask)?,
    ];
    let out = OutputDir::create(&args.out.out_dir, &Manifest::new("check", inputs, args))?;
    let schema = Schema::new().with("id", ColumnRole::Id).with_default(ColumnRole::Cause);
    let data = load_csv(&args.causes, &schema).map_err(CliError::stage("load"))?;
    let model: PpcaModel = read_json(&args.model)?;
    let mask: HoldoutMask = read_json(&args.mask)?;
    let cfg = deconfounder::CheckConfig {
        replications: args.replications,
        samples: args.samples,
        threshold: args.threshold,
        seed: args.seed,
        aggregation: args.aggregation.into(),
    };
    let result = predictive_check(&model, &data.causes, &mask, &cfg).map_err(CliError::stage("check"))?;
    out.write_json("check.json", &result)?;
    let mut text = String::new();
    writeln!(text, "deconfounder check").unwrap();
    writeln!(text, "manifest sha256: {}", out.manifest_sha256).unwrap();
    writeln!(text, "{}", check_line(&result)).unwrap();
    out.write_text("report.txt", &text)?;
    out.write_json(
        "report.json",
        &serde_json::json!({
            "manifest_sha256": out.manifest_sha256,
            "command": "check",
            "predictive_check": CheckSummary::from(&result),
        }),
    )?;
    if !result.passed {
        return Err(CliError::Gate {
            score: result.score,
            threshold: result.threshold,
        });
    }
    Ok(Outcome {
        out_dir: out.path.clone(),
        manifest_sha256: out.manifest_sha256,
        summary: text,
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImputeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// Visit columns in a seeded random order each sweep
    #[arg(long)]
    pub randomize_order: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

pub fn run_impute(args: &ImputeArgs) -> CliResult<Outcome> {
    let (data, record) = args.input.load(&[])?;
    let out = OutputDir::create(&args.out.out_dir, &Manifest::new("impute", vec![record], args))?;
    let cfg = MiceConfig {
        iterations: args.iterations,
        seed: args.seed,
        randomize_order: args.randomize_order,
        ..MiceConfig::default()
    };
    let imp = impute_mice(&data.causes, &cfg).map_err(CliError::stage("impute"))?;
    let imputed = Dataset {
        causes: imp.matrix.clone(),
        ..data.clone()
    };
    write_csv(out.file("imputed.csv"), &imputed).map_err(CliError::stage("output"))?;
    let mut text = String::new();
    writeln!(text, "deconfounder impute").unwrap();
    writeln!(text, "manifest sha256: {}", out.manifest_sha256).unwrap();
    writeln!(text, "imputed cells: {}", data.causes.missing_count()).unwrap();
    writeln!(
        text,
        "sweeps: {} ({})",
        imp.sweeps,
        if imp.converged {
            "converged"
        } else {
            "sweep cap reached"
        }
    )
    .unwrap();
    if !imp.fallback_columns.is_empty() {
        writeln!(
            text,
            "mean fallback for singular regressions: {}",
            imp.fallback_columns.join(", ")
        )
        .unwrap();
    }
    out.write_text("report.txt", &text)?;
    out.write_json(
        "report.json",
        &serde_json::json!({
            "manifest_sha256": out.manifest_sha256,
            "command": "impute",
            "imputed_cells": data.causes.missing_count(),
            "sweeps": imp.sweeps,
            "converged": imp.converged,
            "fallback_columns": imp.fallback_columns,
        }),
    )?;
    Ok(Outcome {
        out_dir: out.path.clone(),
        manifest_sha256: out.manifest_sha256,
        summary: text,
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// JSON generator configuration; overrides --scenario
    #[arg(long, conflicts_with = "scenario")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    pub scenario: Option<Scenario>,
    #[arg(long, default_value_t = 5000)]
    pub n_units: usize,
    #[arg(long)]
    pub missing_rate: Option<f64>,
    /// Required with --scenario
    #[arg(long, required_unless_present = "config")]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

pub fn run_synth(args: &SynthArgs) -> CliResult<Outcome> {
    let (mut cfg, inputs): (SyntheticConfig, _) = match (&args.config, args.scenario) {
        (Some(path), _) => (read_json(path)?, vec![InputRecord::read("config", path)?]),
        (None, Some(s)) => {
            let seed = args
                .seed
                .ok_or_else(|| CliError::Usage("--seed is required with --scenario".into()))?;
            (s.config(args.n_units, seed), Vec::new())
        }
        (None, None) => return Err(CliError::Usage("give --config or --scenario".into())),
    };
    if args.config.is_some() {
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
    }
    if let Some(rate) = args.missing_rate {
        cfg.missing_rate = rate;
    }
    let out = OutputDir::create(&args.out.out_dir, &Manifest::new("synth", inputs, &cfg))?;
    let ds = generate(&cfg).map_err(CliError::stage("synth"))?;
    write_csv(out.file("data.csv"), &ds.to_dataset()).map_err(CliError::stage("output"))?;
    out.write_json("truth.json", &ds.truth)?;
    let mut text = String::new();
    writeln!(text, "deconfounder synth").unwrap();
    writeln!(text, "manifest sha256: {}", out.manifest_sha256).unwrap();
    writeln!(
        text,
        "units: {}; causes: {}; latents: {}",
        cfg.n_units, cfg.n_causes, cfg.latent_dim
    )
    .unwrap();
    writeln!(text, "missing cells: {}", ds.causes.missing_count()).unwrap();
    writeln!(
        text,
        "outcomes: {}",
        if ds.rating.is_some() {
            "rating, popularity"
        } else {
            "popularity"
        }
    )
    .unwrap();
    if ds.truth.overlap_shift > 0.0 {
        writeln!(text, "overlap shift applied: {:.6}", ds.truth.overlap_shift).unwrap();
    }
    out.write_text("report.txt", &text)?;
    Ok(Outcome {
        out_dir: out.path.clone(),
        manifest_sha256: out.manifest_sha256,
        summary: text,
    })
}
