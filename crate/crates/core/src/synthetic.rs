//! Synthetic data with planted hidden confounders, an optional mediator and
//! MAR missingness.
//!
//! Per unit: `z ~ N(0, I_K)`, `a = L z + e_a`. With a mediator,
//! `r = θᵀa + s·1ᵀz + e_r` and `y = βᵀa + λ r + γᵀz + e_y`; otherwise
//! `y = βᵀa + γᵀz + e_y`. Cause column 0 is always observed; every other
//! entry of row `i` goes missing with a probability that rises logistically
//! with the standardized value of column 0.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{check_overlap, mean_and_sd, CauseMatrix, Dataset, OutcomeKind, OutcomeVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_units: usize,
    pub n_causes: usize,
    pub latent_dim: usize,
    /// Row-major D×K matrix mapping latents to causes.
    pub confounder_loadings: Vec<f64>,
    pub outcome_gamma: Vec<f64>,
    pub true_beta: Vec<f64>,
    #[serde(default)]
    pub mediator_theta: Option<Vec<f64>>,
    #[serde(default)]
    pub mediator_lambda: Option<f64>,
    /// Weight of `1ᵀz` in the mediator; nonzero breaks sequential ignorability.
    #[serde(default)]
    pub mediator_confounding: f64,
    pub noise_sd_causes: f64,
    pub noise_sd_outcome: f64,
    #[serde(default)]
    pub missing_rate: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Dense unit loadings, no mediator, no missingness.
    pub fn confounded(n_units: usize, true_beta: Vec<f64>, outcome_gamma: Vec<f64>, seed: u64) -> Self {
        let d = true_beta.len();
        let k = outcome_gamma.len();
        SyntheticConfig {
            n_units,
            n_causes: d,
            latent_dim: k,
            confounder_loadings: vec![1.0; d * k],
            outcome_gamma,
            true_beta,
            mediator_theta: None,
            mediator_lambda: None,
            mediator_confounding: 0.0,
            noise_sd_causes: 1.0,
            noise_sd_outcome: 1.0,
            missing_rate: 0.0,
            seed,
        }
    }

    pub fn loadings(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_causes, self.latent_dim, &self.confounder_loadings)
    }

    pub fn has_mediator(&self) -> bool {
        self.mediator_theta.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d, k) = (self.n_units, self.n_causes, self.latent_dim);
        if n < 2 || d < 1 || k < 1 {
            return Err(Error::validation(format!(
                "need n_units >= 2, n_causes >= 1, latent_dim >= 1; got {n}, {d}, {k}"
            )));
        }
        if self.confounder_loadings.len() != d * k {
            return Err(Error::validation(format!(
                "confounder_loadings has {} entries; expected {d}x{k}",
                self.confounder_loadings.len()
            )));
        }
        if self.outcome_gamma.len() != k {
            return Err(Error::validation(format!(
                "outcome_gamma has {} entries; expected {k}",
                self.outcome_gamma.len()
            )));
        }
        if self.true_beta.len() != d {
            return Err(Error::validation(format!(
                "true_beta has {} entries; expected {d}",
                self.true_beta.len()
            )));
        }
        match (&self.mediator_theta, self.mediator_lambda) {
            (Some(theta), Some(_)) if theta.len() != d => {
                return Err(Error::validation(format!(
                    "mediator_theta has {} entries; expected {d}",
                    theta.len()
                )))
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(Error::validation(
                    "mediator_theta and mediator_lambda must be given together",
                ))
            }
            _ => {}
        }
        if !(self.noise_sd_causes > 0.0 && self.noise_sd_outcome > 0.0) {
            return Err(Error::validation("noise standard deviations must be positive"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::validation(format!(
                "missing_rate must lie in [0, 1), got {}",
                self.missing_rate
            )));
        }
        if self.missing_rate > 0.0 && d < 2 {
            return Err(Error::validation(
                "missingness needs at least 2 causes (column 0 is always observed)",
            ));
        }
        let values = self
            .confounder_loadings
            .iter()
            .chain(&self.outcome_gamma)
            .chain(&self.true_beta)
            .chain(self.mediator_theta.iter().flatten());
        if values.chain([&self.mediator_confounding]).any(|v| !v.is_finite()) {
            return Err(Error::validation("configuration contains non-finite values"));
        }
        // a confounder that touches the outcome must drive at least two causes
        let loadings = self.loadings();
        for (c, &g) in self.outcome_gamma.iter().enumerate() {
            let driven = loadings.column(c).iter().filter(|&&v| v != 0.0).count();
            if g != 0.0 && driven < 2 {
                return Err(Error::validation(format!(
                    "latent {} affects the outcome but loads on {driven} cause(s); at least 2 are required",
                    c + 1
                )));
            }
        }
        Ok(())
    }
}

/// The generator's ground truth. Estimators under test must not read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TruthDoc", try_from = "TruthDoc")]
pub struct SyntheticTruth {
    /// N×K realized latents.
    pub latents: DMatrix<f64>,
    /// N×D causes before missingness (after the overlap shift).
    pub complete_causes: DMatrix<f64>,
    pub loadings: DMatrix<f64>,
    pub true_beta: DVector<f64>,
    pub outcome_gamma: DVector<f64>,
    pub mediator_theta: Option<DVector<f64>>,
    pub mediator_lambda: Option<f64>,
    pub mediator_confounding: f64,
    /// Constant added to every cause so that each unit has a positive one.
    pub overlap_shift: f64,
    /// Row-major missingness actually applied.
    pub missing: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct TruthDoc {
    n: usize,
    d: usize,
    k: usize,
    latents: Vec<f64>,
    complete_causes: Vec<f64>,
    loadings: Vec<f64>,
    true_beta: Vec<f64>,
    outcome_gamma: Vec<f64>,
    mediator_theta: Option<Vec<f64>>,
    mediator_lambda: Option<f64>,
    mediator_confounding: f64,
    overlap_shift: f64,
    missing: Vec<bool>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<SyntheticTruth> for TruthDoc {
    fn from(t: SyntheticTruth) -> Self {
        TruthDoc {
            n: t.latents.nrows(),
            d: t.loadings.nrows(),
            k: t.loadings.ncols(),
            latents: row_major(&t.latents),
            complete_causes: row_major(&t.complete_causes),
            loadings: row_major(&t.loadings),
            true_beta: t.true_beta.as_slice().to_vec(),
            outcome_gamma: t.outcome_gamma.as_slice().to_vec(),
            mediator_theta: t.mediator_theta.map(|v| v.as_slice().to_vec()),
            mediator_lambda: t.mediator_lambda,
            mediator_confounding: t.mediator_confounding,
            overlap_shift: t.overlap_shift,
            missing: t.missing,
        }
    }
}

impl TryFrom<TruthDoc> for SyntheticTruth {
    type Error = String;

    fn try_from(t: TruthDoc) -> std::result::Result<Self, String> {
        let (n, d, k) = (t.n, t.d, t.k);
        if t.latents.len() != n * k
            || t.complete_causes.len() != n * d
            || t.loadings.len() != d * k
            || t.true_beta.len() != d
            || t.outcome_gamma.len() != k
            || t.missing.len() != n * d
            || t.mediator_theta.as_ref().is_some_and(|v| v.len() != d)
        {
            return Err("truth document has inconsistent dimensions".into());
        }
        Ok(SyntheticTruth {
            latents: DMatrix::from_row_slice(n, k, &t.latents),
            complete_causes: DMatrix::from_row_slice(n, d, &t.complete_causes),
            loadings: DMatrix::from_row_slice(d, k, &t.loadings),
            true_beta: DVector::from_vec(t.true_beta),
            outcome_gamma: DVector::from_vec(t.outcome_gamma),
            mediator_theta: t.mediator_theta.map(DVector::from_vec),
            mediator_lambda: t.mediator_lambda,
            mediator_confounding: t.mediator_confounding,
            overlap_shift: t.overlap_shift,
            missing: t.missing,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub causes: CauseMatrix,
    /// The mediator, present iff the config has one.
    pub rating: Option<OutcomeVector>,
    pub popularity: OutcomeVector,
    pub truth: SyntheticTruth,
}

impl SyntheticDataset {
    pub fn to_dataset(&self) -> Dataset {
        let mut outcomes: Vec<OutcomeVector> = self.rating.iter().cloned().collect();
        outcomes.push(self.popularity.clone());
        Dataset {
            causes: self.causes.clone(),
            outcomes,
            covariates: None,
        }
    }
}

pub fn cause_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("cause_{j}")).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let (n, d, k) = (cfg.n_units, cfg.n_causes, cfg.latent_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let loadings = cfg.loadings();
    let latents = DMatrix::from_fn(n, k, |_, _| normal(&mut rng));
    let noise = DMatrix::from_fn(n, d, |_, _| cfg.noise_sd_causes * normal(&mut rng));
    let mut causes = &latents * loadings.transpose() + noise;

    // MAR on the standardized anchor column; the D/(D-1) factor compensates
    // for the anchor never going missing, and 2·sigmoid averages to about 1
    let mut missing = vec![false; n * d];
    if cfg.missing_rate > 0.0 {
        let (mu, sd) = mean_and_sd(causes.column(0).iter().copied());
        let scale = cfg.missing_rate * d as f64 / (d - 1) as f64;
        for i in 0..n {
            let p = (scale * 2.0 * sigmoid((causes[(i, 0)] - mu) / sd.max(f64::MIN_POSITIVE))).min(1.0);
            for j in 1..d {
                missing[i * d + j] = rng.random::<f64>() < p;
            }
        }
        // every column keeps at least one observed entry
        for j in 1..d {
            if (0..n).all(|i| missing[i * d + j]) {
                missing[j] = false;
            }
        }
    }

    // smallest constant that gives every unit a strictly positive observed cause
    let worst = (0..n)
        .map(|i| {
            (0..d)
                .filter(|&j| !missing[i * d + j])
                .map(|j| causes[(i, j)])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    let overlap_shift = if worst > 0.0 { 0.0 } else { 1e-6 - worst };
    causes.add_scalar_mut(overlap_shift);

    let beta = DVector::from_column_slice(&cfg.true_beta);
    let gamma = DVector::from_column_slice(&cfg.outcome_gamma);
    let confounding = &latents * &gamma;
    let mut y = &causes * &beta + confounding;
    let rating = match (&cfg.mediator_theta, cfg.mediator_lambda) {
        (Some(theta), Some(lambda)) => {
            let theta = DVector::from_column_slice(theta);
            let r = DVector::from_fn(n, |i, _| {
                causes.row(i).dot(&theta.transpose())
                    + cfg.mediator_confounding * latents.row(i).sum()
                    + cfg.noise_sd_outcome * normal(&mut rng)
            });
            y += lambda * &r;
            Some(r)
        }
        _ => None,
    };
    for v in y.iter_mut() {
        *v += cfg.noise_sd_outcome * normal(&mut rng);
    }

    let cause_matrix = CauseMatrix::with_missing(
        causes.clone(),
        missing.clone(),
        cause_names(d),
        (1..=n).map(|i| format!("u{i}")).collect(),
    )?;
    debug_assert!(check_overlap(&cause_matrix).passed);
    let rating = rating
        .map(|r| OutcomeVector::new("rating", OutcomeKind::Rating, r.as_slice().to_vec()))
        .transpose()?;
    let popularity = OutcomeVector::new("popularity", OutcomeKind::Popularity, y.as_slice().to_vec())?;
    Ok(SyntheticDataset {
        causes: cause_matrix,
        rating,
        popularity,
        truth: SyntheticTruth {
            latents,
            complete_causes: causes,
            loadings,
            true_beta: beta,
            outcome_gamma: gamma,
            mediator_theta: cfg.mediator_theta.clone().map(DVector::from_vec),
            mediator_lambda: cfg.mediator_lambda,
            mediator_confounding: cfg.mediator_confounding,
            overlap_shift,
            missing,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::estimate_effects_noncausal;

    fn naive_z_scores(data: &SyntheticDataset) -> Vec<f64> {
        let est = estimate_effects_noncausal(&data.causes, &data.popularity, None).unwrap();
        est.cause_rows()
            .iter()
            .zip(data.truth.true_beta.iter())
            .map(|(r, b)| (r.mean - b) / r.std)
            .collect()
    }

    #[test]
    fn unconfounded_naive_recovers_beta() {
        let cfg = SyntheticConfig::confounded(2000, vec![0.5, -1.0, 0.0, 0.3], vec![0.0, 0.0], 11);
        let data = generate(&cfg).unwrap();
        assert!(naive_z_scores(&data).iter().all(|z| z.abs() < 3.0));
    }

    #[test]
    fn confounded_naive_is_biased() {
        let mut biased = 0;
        for seed in 0..20 {
            let mut cfg = SyntheticConfig::confounded(5000, vec![0.5, -1.0, 0.0, 0.3], vec![1.0], seed);
            cfg.confounder_loadings = vec![1.0, 0.8, 0.6, 0.4];
            let data = generate(&cfg).unwrap();
            biased += naive_z_scores(&data).iter().any(|z| z.abs() > 2.0) as usize;
        }
        assert!(biased >= 18, "{biased}/20");
    }

    #[test]
    fn missing_fraction_matches_rate() {
        let mut cfg = SyntheticConfig::confounded(5000, vec![0.1; 9], vec![0.5, 0.5, 0.5], 3);
        cfg.missing_rate = 0.1;
        let data = generate(&cfg).unwrap();
        let frac = data.causes.missing_count() as f64 / (5000.0 * 9.0);
        assert!((frac - 0.1).abs() < 0.01, "{frac}");
        assert!((0..5000).all(|i| !data.causes.is_missing(i, 0)));
        assert!(check_overlap(&data.causes).passed);
    }

    #[test]
    fn missingness_depends_on_the_anchor_column() {
        let mut cfg = SyntheticConfig::confounded(5000, vec![0.1; 5], vec![0.0], 9);
        cfg.missing_rate = 0.2;
        let data = generate(&cfg).unwrap();
        let median = {
            let mut v: Vec<f64> = data.truth.complete_causes.column(0).iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let (mut low, mut high) = (0, 0);
        for i in 0..5000 {
            let m = (1..5).filter(|&j| data.causes.is_missing(i, j)).count();
            if data.truth.complete_causes[(i, 0)] < median {
                low += m;
            } else {
                high += m;
            }
        }
        assert!(high > 2 * low);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut cfg = SyntheticConfig::confounded(300, vec![0.2, 0.1, -0.3], vec![1.0], 7);
        cfg.mediator_theta = Some(vec![0.5, 0.0, -0.5]);
        cfg.mediator_lambda = Some(0.8);
        cfg.missing_rate = 0.1;
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.popularity.values().as_slice(), b.popularity.values().as_slice());
        assert_eq!(a.causes.missing_mask(), b.causes.missing_mask());
        assert_eq!(a.truth, b.truth);
        let json = serde_json::to_string(&a.truth).unwrap();
        let back: SyntheticTruth = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a.truth);
        assert!(a.rating.is_some());
    }

    #[test]
    fn overlap_shift_applied_when_needed() {
        // with one cause and strongly negative values most rows fail unshifted
        let mut cfg = SyntheticConfig::confounded(200, vec![0.2, 0.2], vec![0.0], 1);
        cfg.confounder_loadings = vec![3.0, 3.0];
        let data = generate(&cfg).unwrap();
        assert!(data.truth.overlap_shift > 0.0);
        assert!(check_overlap(&data.causes).passed);
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = SyntheticConfig::confounded(100, vec![0.1, 0.2], vec![1.0], 0);
        let mut c = base.clone();
        c.missing_rate = 1.0;
        assert!(generate(&c).is_err());
        let mut c = base.clone();
        c.noise_sd_outcome = 0.0;
        assert!(generate(&c).is_err());
        let mut c = base.clone();
        c.true_beta.push(0.0);
        assert!(generate(&c).is_err());
        let mut c = base.clone();
        c.confounder_loadings = vec![1.0, 0.0];
        assert!(generate(&c).is_err(), "single-cause confounder must be rejected");
        c.outcome_gamma = vec![0.0];
        assert!(generate(&c).is_ok());
    }
}
