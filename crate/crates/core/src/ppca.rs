//! Probabilistic PCA as the assignment model for the causes.
//!
//! Each unit's causes are modelled as `a = W z + μ + ε` with `z ~ N(0, I_K)`
//! and `ε ~ N(0, σ² I_D)`, so marginally `a ~ N(μ, W Wᵀ + σ² I)`. The model
//! is fitted by EM, either on complete data or on the entries left visible
//! by a [`HoldoutMask`], and the posterior mean of `z` serves as the
//! surrogate confounder.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CauseMatrix, HoldoutMask};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// EM settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Stop when `|ΔL| <= tol * |L|` between successive iterations.
    pub tol: f64,
    /// Seeds the Gaussian initialization of the loadings.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 1000,
            tol: 1e-13,
            seed: 0,
        }
    }
}

/// Fitted PPCA model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDoc", try_from = "ModelDoc")]
pub struct PpcaModel {
    /// D×K loadings `W`.
    pub loadings: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub noise_variance: f64,
    /// Marginal log-likelihood of the training data at the returned parameters.
    pub log_likelihood: f64,
    /// Log-likelihood after initialization and after each EM update.
    pub fit_trace: Vec<f64>,
    pub converged: bool,
}

impl PpcaModel {
    pub fn n_causes(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.loadings.ncols()
    }

    /// `W Wᵀ + σ² I`.
    pub fn marginal_covariance(&self) -> DMatrix<f64> {
        let d = self.n_causes();
        &self.loadings * self.loadings.transpose() + DMatrix::identity(d, d) * self.noise_variance
    }

    /// `M = WᵀW + σ² I`.
    fn precision_core(&self, rows: Option<&[usize]>) -> DMatrix<f64> {
        let k = self.latent_dim();
        let wtw = match rows {
            None => self.loadings.transpose() * &self.loadings,
            Some(rows) => {
                let w = self.loadings.select_rows(rows);
                w.transpose() * w
            }
        };
        wtw + DMatrix::identity(k, k) * self.noise_variance
    }

    fn check_width(&self, m: &CauseMatrix) -> Result<()> {
        if m.n_causes() != self.n_causes() {
            return Err(Error::validation(format!(
                "model has {} causes but the matrix has {}",
                self.n_causes(),
                m.n_causes()
            )));
        }
        Ok(())
    }

    /// Marginal log-likelihood of a complete cause matrix under this model.
    pub fn log_likelihood_of(&self, m: &CauseMatrix) -> Result<f64> {
        self.check_width(m)?;
        m.require_complete("log-likelihood evaluation")?;
        let s = scatter(m.values(), &self.mean);
        gaussian_log_likelihood(m.n_units(), &self.loadings, self.noise_variance, &s)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    d: usize,
    k: usize,
    /// Row-major D×K.
    loadings: Vec<f64>,
    mean: Vec<f64>,
    noise_variance: f64,
    log_likelihood: f64,
    #[serde(default)]
    fit_trace: Vec<f64>,
    #[serde(default)]
    converged: bool,
}

impl From<PpcaModel> for ModelDoc {
    fn from(m: PpcaModel) -> Self {
        let (d, k) = m.loadings.shape();
        ModelDoc {
            d,
            k,
            loadings: m.loadings.transpose().as_slice().to_vec(),
            mean: m.mean.as_slice().to_vec(),
            noise_variance: m.noise_variance,
            log_likelihood: m.log_likelihood,
            fit_trace: m.fit_trace,
            converged: m.converged,
        }
    }
}

impl TryFrom<ModelDoc> for PpcaModel {
    type Error = String;

    fn try_from(doc: ModelDoc) -> std::result::Result<Self, String> {
        if doc.loadings.len() != doc.d * doc.k || doc.mean.len() != doc.d {
            return Err("model document dimensions are inconsistent".into());
        }
        if doc.noise_variance.is_nan() || doc.noise_variance <= 0.0 {
            return Err("noise_variance must be positive".into());
        }
        Ok(PpcaModel {
            loadings: DMatrix::from_row_slice(doc.d, doc.k, &doc.loadings),
            mean: DVector::from_vec(doc.mean),
            noise_variance: doc.noise_variance,
            log_likelihood: doc.log_likelihood,
            fit_trace: doc.fit_trace,
            converged: doc.converged,
        })
    }
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()))
}

/// `(1/N) Σ (a - μ)(a - μ)ᵀ`.
fn scatter(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for j in 0..c.ncols() {
        c.column_mut(j).add_scalar_mut(-mean[j]);
    }
    c.transpose() * &c / x.nrows() as f64
}

/// `-N/2 [D ln 2π + ln|C| + tr(C⁻¹ S)]` with `C = W Wᵀ + σ² I`, via Woodbury.
fn gaussian_log_likelihood(n: usize, w: &DMatrix<f64>, sigma2: f64, s: &DMatrix<f64>) -> Result<f64> {
    let (d, k) = w.shape();
    let m = w.transpose() * w + DMatrix::identity(k, k) * sigma2;
    let (m_inv, log_det_m) = spd_inverse(&m)?;
    let log_det_c = (d - k) as f64 * sigma2.ln() + log_det_m;
    let sw = s * w;
    let tr = (s.trace() - (&m_inv * w.transpose() * &sw).trace()) / sigma2;
    Ok(-0.5 * n as f64 * (d as f64 * LN_2PI + log_det_c + tr))
}

fn validate_dims(m: &CauseMatrix, k: usize) -> Result<()> {
    let (n, d) = (m.n_units(), m.n_causes());
    if k < 1 || k >= d {
        return Err(Error::validation(format!(
            "latent dimension must satisfy 1 <= K < D = {d}, got K = {k}"
        )));
    }
    if n <= k {
        return Err(Error::validation(format!(
            "need more units ({n}) than latent dimensions ({k})"
        )));
    }
    Ok(())
}

/// Descending eigenvalues and matching eigenvectors of a symmetric matrix.
fn sorted_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(s.nrows(), s.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn check_rank(eigenvalues: &[f64], k: usize) -> Result<()> {
    let top = eigenvalues[0].max(0.0);
    let rank = eigenvalues.iter().filter(|&&l| l > 1e-12 * top).count();
    // rank == K would put the noise variance at zero
    if rank <= k {
        return Err(Error::validation(format!(
            "sample covariance has rank {rank}, which cannot support K = {k} with positive noise; choose K < {rank}"
        )));
    }
    Ok(())
}

/// The maximum-likelihood solution from the sample-covariance
/// eigendecomposition: `σ²` is the mean of the discarded eigenvalues and
/// `W = U_K (Λ_K - σ² I)^{1/2}`.
pub fn closed_form_ppca(m: &CauseMatrix, k: usize) -> Result<PpcaModel> {
    m.require_complete("PPCA fitting")?;
    validate_dims(m, k)?;
    let (n, d) = (m.n_units(), m.n_causes());
    let mean = column_means(m.values());
    let s = scatter(m.values(), &mean);
    let (lambda, u) = sorted_eigen(&s);
    check_rank(&lambda, k)?;
    let sigma2 = lambda[k..].iter().sum::<f64>() / (d - k) as f64;
    let mut w = u.columns(0, k).into_owned();
    for (c, l) in lambda[..k].iter().enumerate() {
        w.column_mut(c).scale_mut((l - sigma2).max(0.0).sqrt());
    }
    let ll = -0.5
        * n as f64
        * (d as f64 * LN_2PI
            + lambda[..k].iter().map(|l| l.ln()).sum::<f64>()
            + (d - k) as f64 * sigma2.ln()
            + d as f64);
    Ok(PpcaModel {
        loadings: w,
        mean,
        noise_variance: sigma2,
        log_likelihood: ll,
        fit_trace: vec![ll],
        converged: true,
    })
}

fn initial_loadings(d: usize, k: usize, scale: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(d, k, |_, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        e * scale
    })
}

/// Fits PPCA to a complete cause matrix by EM on the sample covariance.
pub fn fit_ppca(m: &CauseMatrix, k: usize, cfg: &FitConfig) -> Result<PpcaModel> {
    m.require_complete("PPCA fitting")?;
    validate_dims(m, k)?;
    let (n, d) = (m.n_units(), m.n_causes());
    let mean = column_means(m.values());
    let s = scatter(m.values(), &mean);
    let (lambda, _) = sorted_eigen(&s);
    check_rank(&lambda, k)?;

    let avg_var = s.trace() / d as f64;
    let sigma_floor = 1e-12 * avg_var;
    let mut w = initial_loadings(d, k, avg_var.sqrt(), cfg.seed);
    let mut sigma2 = 0.5 * avg_var;
    let mut ll = gaussian_log_likelihood(n, &w, sigma2, &s)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let eye_k = DMatrix::<f64>::identity(k, k);

    for _ in 0..cfg.max_iter {
        let (m_inv, _) = spd_inverse(&(w.transpose() * &w + &eye_k * sigma2))?;
        let sw = &s * &w;
        let inner = &eye_k * sigma2 + &m_inv * w.transpose() * &sw;
        let inner_inv = inner
            .try_inverse()
            .ok_or_else(|| Error::Numeric("EM update matrix is singular".into()))?;
        let w_new = &sw * inner_inv;
        let sigma2_new = ((s.trace() - (&sw * &m_inv * w_new.transpose()).trace()) / d as f64).max(sigma_floor);
        let ll_new = gaussian_log_likelihood(n, &w_new, sigma2_new, &s)?;
        w = w_new;
        sigma2 = sigma2_new;
        trace.push(ll_new);
        let delta = (ll_new - ll).abs();
        ll = ll_new;
        if delta <= cfg.tol * ll.abs() {
            converged = true;
            break;
        }
    }
    Ok(PpcaModel {
        loadings: w,
        mean,
        noise_variance: sigma2,
        log_likelihood: ll,
        fit_trace: trace,
        converged,
    })
}

/// Per-unit posterior of `z` given a subset of coordinates.
struct UnitPosterior {
    mean: DVector<f64>,
    /// `σ² M⁻¹`
    cov: DMatrix<f64>,
    log_lik: f64,
}

fn unit_posterior(
    w: &DMatrix<f64>,
    mu: &DVector<f64>,
    sigma2: f64,
    a: &[f64],
    observed: &[usize],
) -> Result<UnitPosterior> {
    let k = w.ncols();
    let w_o = w.select_rows(observed);
    let r = DVector::from_iterator(observed.len(), observed.iter().map(|&j| a[j] - mu[j]));
    let m = w_o.transpose() * &w_o + DMatrix::identity(k, k) * sigma2;
    let (m_inv, log_det_m) = spd_inverse(&m)?;
    let wtr = w_o.transpose() * &r;
    let mean = &m_inv * &wtr;
    let o = observed.len() as f64;
    let quad = (r.dot(&r) - wtr.dot(&mean)) / sigma2;
    let log_lik = -0.5 * (o * LN_2PI + (o - k as f64) * sigma2.ln() + log_det_m + quad);
    Ok(UnitPosterior {
        mean,
        cov: m_inv * sigma2,
        log_lik,
    })
}

fn row(m: &CauseMatrix, i: usize) -> Vec<f64> {
    m.values().row(i).iter().copied().collect()
}

/// Fits PPCA using only the entries a [`HoldoutMask`] leaves visible.
///
/// EM over the observed-data likelihood: the mean and loadings of each
/// coordinate are updated jointly from the units that observe it.
pub fn fit_ppca_masked(m: &CauseMatrix, mask: &HoldoutMask, k: usize, cfg: &FitConfig) -> Result<PpcaModel> {
    m.require_complete("PPCA fitting")?;
    validate_dims(m, k)?;
    mask.check_shape(m)?;
    let (n, d) = (m.n_units(), m.n_causes());
    let observed: Vec<Vec<usize>> = (0..n).map(|i| mask.observed_in_row(i)).collect();
    if let Some(i) = observed.iter().position(|o| o.is_empty()) {
        return Err(Error::validation(format!("row {} has every cause held out", i + 1)));
    }
    let mut counts = vec![0usize; d];
    for o in &observed {
        for &j in o {
            counts[j] += 1;
        }
    }
    if let Some(j) = counts.iter().position(|&c| c <= k) {
        return Err(Error::validation(format!(
            "cause `{}` is observed in only {} rows after masking",
            m.column_names()[j],
            counts[j]
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(m, i)).collect();

    let mut mu = DVector::zeros(d);
    let mut var = vec![0.0; d];
    for j in 0..d {
        let vals: Vec<f64> = (0..n).filter(|&i| !mask.is_held(i, j)).map(|i| rows[i][j]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        mu[j] = mean;
        var[j] = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    }
    let avg_var = var.iter().sum::<f64>() / d as f64;
    if avg_var.is_nan() || avg_var <= 0.0 {
        return Err(Error::validation("observed causes have zero variance"));
    }
    let sigma_floor = 1e-12 * avg_var;
    let mut w = initial_loadings(d, k, avg_var.sqrt(), cfg.seed);
    let mut sigma2 = 0.5 * avg_var;
    let n_obs: usize = counts.iter().sum();

    let mut trace = Vec::new();
    let mut converged = false;
    let mut ll_prev = f64::NAN;
    for iter in 0..=cfg.max_iter {
        let posts = (0..n)
            .into_par_iter()
            .map(|i| unit_posterior(&w, &mu, sigma2, &rows[i], &observed[i]))
            .collect::<Result<Vec<_>>>()?;
        let ll: f64 = posts.iter().map(|p| p.log_lik).sum();
        trace.push(ll);
        if iter > 0 && (ll - ll_prev).abs() <= cfg.tol * ll.abs() {
            converged = true;
            break;
        }
        if iter == cfg.max_iter {
            break;
        }
        ll_prev = ll;

        // M-step: [w_j, μ_j] solves the normal equations built from the
        // augmented latent moments E[(z,1)(z,1)ᵀ] over units observing j.
        let mut lhs = vec![DMatrix::<f64>::zeros(k + 1, k + 1); d];
        let mut rhs = vec![DVector::<f64>::zeros(k + 1); d];
        for (i, p) in posts.iter().enumerate() {
            let mut ez = DVector::zeros(k + 1);
            ez.rows_mut(0, k).copy_from(&p.mean);
            ez[k] = 1.0;
            let mut ezz = &ez * ez.transpose();
            {
                let mut block = ezz.view_mut((0, 0), (k, k));
                block += &p.cov;
            }
            for &j in &observed[i] {
                lhs[j] += &ezz;
                rhs[j].axpy(rows[i][j], &ez, 1.0);
            }
        }
        for j in 0..d {
            let sol = Cholesky::new(lhs[j].clone())
                .ok_or_else(|| Error::Numeric("latent moment matrix is not positive definite".into()))?
                .solve(&rhs[j]);
            for c in 0..k {
                w[(j, c)] = sol[c];
            }
            mu[j] = sol[k];
        }
        let mut resid = 0.0;
        for (i, p) in posts.iter().enumerate() {
            for &j in &observed[i] {
                let wj = w.row(j).transpose();
                let e = rows[i][j] - wj.dot(&p.mean) - mu[j];
                resid += e * e + (wj.transpose() * &p.cov * &wj)[(0, 0)];
            }
        }
        sigma2 = (resid / n_obs as f64).max(sigma_floor);
    }
    let log_likelihood = *trace.last().expect("at least one E-step");
    Ok(PpcaModel {
        loadings: w,
        mean: mu,
        noise_variance: sigma2,
        log_likelihood,
        fit_trace: trace,
        converged,
    })
}

/// Posterior covariance of the surrogate confounders.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorCovariance {
    /// Fully observed units share one K×K covariance.
    Shared(DMatrix<f64>),
    /// One K×K covariance per unit when units observe different coordinates.
    PerUnit(Vec<DMatrix<f64>>),
}

/// Per-unit posterior means `E[z_i | a_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateConfounders {
    /// N×K.
    pub values: DMatrix<f64>,
    pub covariance: PosteriorCovariance,
}

impl SurrogateConfounders {
    pub fn n_units(&self) -> usize {
        self.values.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> Vec<String> {
        (1..=self.latent_dim()).map(|k| format!("z{k}")).collect()
    }
}

/// `ẑ = M⁻¹ Wᵀ (a - μ)` for every unit, with shared covariance `σ² M⁻¹`.
pub fn posterior_mean(model: &PpcaModel, m: &CauseMatrix) -> Result<SurrogateConfounders> {
    model.check_width(m)?;
    m.require_complete("posterior inference")?;
    let (m_inv, _) = spd_inverse(&model.precision_core(None))?;
    let mut centered = m.values().clone();
    for j in 0..centered.ncols() {
        centered.column_mut(j).add_scalar_mut(-model.mean[j]);
    }
    let values = centered * &model.loadings * &m_inv;
    Ok(SurrogateConfounders {
        values,
        covariance: PosteriorCovariance::Shared(m_inv * model.noise_variance),
    })
}

/// Posterior of `z` for each unit given only its unmasked coordinates.
pub fn posterior_mean_partial(model: &PpcaModel, m: &CauseMatrix, mask: &HoldoutMask) -> Result<SurrogateConfounders> {
    model.check_width(m)?;
    m.require_complete("posterior inference")?;
    mask.check_shape(m)?;
    let n = m.n_units();
    let posts = (0..n)
        .into_par_iter()
        .map(|i| {
            let observed = mask.observed_in_row(i);
            if observed.is_empty() {
                return Err(Error::validation(format!("row {} has no observed causes", i + 1)));
            }
            unit_posterior(
                &model.loadings,
                &model.mean,
                model.noise_variance,
                &row(m, i),
                &observed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let k = model.latent_dim();
    let values = DMatrix::from_fn(n, k, |i, c| posts[i].mean[c]);
    let covariance = PosteriorCovariance::PerUnit(posts.into_iter().map(|p| p.cov).collect());
    Ok(SurrogateConfounders { values, covariance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Average of per-unit tail probabilities.
    PerUnit,
    /// Tail probability of the summed statistic across units.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Replicated datasets per unit (B).
    pub replications: usize,
    /// Posterior draws for the Monte Carlo expectation (S).
    pub samples: usize,
    pub threshold: f64,
    pub seed: u64,
    pub aggregation: Aggregation,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            replications: 100,
            samples: 100,
            threshold: 0.1,
            seed: 0,
            aggregation: Aggregation::PerUnit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveCheckResult {
    pub score: f64,
    pub per_unit_scores: Vec<f64>,
    pub threshold: f64,
    pub passed: bool,
    pub replications: usize,
    pub mc_samples: usize,
    pub aggregation: Aggregation,
}

/// Held-out predictive check.
///
/// For each unit the test statistic is the expected held-out log-likelihood
/// `t(a_held) = E[log p(a_held | z) | a_obs]`, estimated with `samples`
/// posterior draws. Replicates of the held-out entries are drawn from the
/// posterior predictive and scored with the same draws; a unit's score is
/// the fraction of replicates whose statistic falls below the observed one.
///
/// Every unit uses its own RNG stream derived from `(seed, unit index)`, so
/// results do not depend on thread scheduling.
pub fn predictive_check(
    model: &PpcaModel,
    m: &CauseMatrix,
    mask: &HoldoutMask,
    cfg: &CheckConfig,
) -> Result<PredictiveCheckResult> {
    model.check_width(m)?;
    m.require_complete("predictive check")?;
    mask.check_shape(m)?;
    if cfg.replications < 10 || cfg.samples < 10 {
        return Err(Error::validation(format!(
            "predictive check needs at least 10 replications and 10 samples, got B = {}, S = {}",
            cfg.replications, cfg.samples
        )));
    }
    let n = m.n_units();
    let sigma2 = model.noise_variance;
    let sigma = sigma2.sqrt();
    let k = model.latent_dim();

    let per_unit: Vec<(f64, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let held = mask.held_in_row(i);
            let observed = mask.observed_in_row(i);
            if held.is_empty() || observed.is_empty() {
                return Err(Error::validation(format!(
                    "row {} must have both held-out and observed entries for the predictive check",
                    i + 1
                )));
            }
            let a = row(m, i);
            let post = unit_posterior(&model.loadings, &model.mean, sigma2, &a, &observed)?;
            let chol = Cholesky::new(post.cov.clone())
                .ok_or_else(|| Error::Numeric("posterior covariance is not positive definite".into()))?
                .unpack();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let draw_z = |rng: &mut ChaCha8Rng| -> DVector<f64> {
                let e = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
                &post.mean + &chol * e
            };
            let w_h = model.loadings.select_rows(&held);
            let mu_h = DVector::from_iterator(held.len(), held.iter().map(|&j| model.mean[j]));
            // predicted held-out means under each posterior draw, S × |H|
            let preds: Vec<DVector<f64>> = (0..cfg.samples).map(|_| &mu_h + &w_h * draw_z(&mut rng)).collect();
            let stat = |x: &DVector<f64>| -> f64 {
                let h = x.len() as f64;
                let total: f64 = preds
                    .iter()
                    .map(|p| -0.5 * (h * (LN_2PI + sigma2.ln())) - (x - p).norm_squared() / (2.0 * sigma2))
                    .sum();
                total / preds.len() as f64
            };
            let a_held = DVector::from_iterator(held.len(), held.iter().map(|&j| a[j]));
            let t_obs = stat(&a_held);
            let t_rep: Vec<f64> = (0..cfg.replications)
                .map(|_| {
                    let z = draw_z(&mut rng);
                    let noise = DVector::from_fn(held.len(), |_, _| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        e * sigma
                    });
                    stat(&(&mu_h + &w_h * z + noise))
                })
                .collect();
            Ok((t_obs, t_rep))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_unit_scores: Vec<f64> = per_unit
        .iter()
        .map(|(t_obs, reps)| reps.iter().filter(|&&r| r < *t_obs).count() as f64 / reps.len() as f64)
        .collect();
    let score = match cfg.aggregation {
        Aggregation::PerUnit => per_unit_scores.iter().sum::<f64>() / n as f64,
        Aggregation::Pooled => {
            let t_obs: f64 = per_unit.iter().map(|(t, _)| t).sum();
            let below = (0..cfg.replications)
                .filter(|&b| per_unit.iter().map(|(_, reps)| reps[b]).sum::<f64>() < t_obs)
                .count();
            below as f64 / cfg.replications as f64
        }
    };
    Ok(PredictiveCheckResult {
        score,
        per_unit_scores,
        threshold: cfg.threshold,
        passed: score > cfg.threshold,
        replications: cfg.replications,
        mc_samples: cfg.samples,
        aggregation: cfg.aggregation,
    })
}
