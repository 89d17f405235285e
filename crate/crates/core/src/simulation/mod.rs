//! Synthetic data with closed-form ground truth and Monte Carlo experiments
//! for coverage, the variance floor, and robustness to nuisance error.
//!
//! Every replication draws from its own random stream keyed by the master
//! seed and the replication index, so reports do not depend on the number of
//! worker threads.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::crossfit::{CrossFit, FoldAssignment};
use crate::cvar::{check_alpha, closed_form_normal_wte};
use crate::data::{EffectDirection, Matrix, ObservationSet};
use crate::error::{Error, Result};
use crate::estimators::{confidence_interval, Method, Sided};
use crate::normal::{normal_pdf, normal_quantile};
use crate::nuisance::{corrupt_oracle, CovariateFn, NuisanceConfig};
use crate::rng::{derive_seed, open_unit, standard_normal, stream_rng};

/// `X ~ N(0, I_d)`, CATE `cate_mean + cate_sd * x_1`, control mean `x_2`
/// (zero when `d = 1`), constant propensity and Gaussian outcome noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianCateDgp {
    pub cate_mean: f64,
    pub cate_sd: f64,
    pub noise_sd: f64,
    pub propensity: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for GaussianCateDgp {
    fn default() -> Self {
        Self { cate_mean: -0.1, cate_sd: 1.0, noise_sd: 1.0, propensity: 0.5, dim: 2, seed: 0 }
    }
}

/// A draw from the DGP together with the true nuisance functions.
#[derive(Clone)]
pub struct SimulatedData {
    pub data: ObservationSet<f64>,
    pub mu0: CovariateFn<f64>,
    pub mu1: CovariateFn<f64>,
    pub propensity: CovariateFn<f64>,
}

impl SimulatedData {
    pub fn oracle_config(&self) -> NuisanceConfig<f64> {
        NuisanceConfig::oracle(self.mu0.clone(), self.mu1.clone(), self.propensity.clone())
    }

    /// True CATE at every row.
    pub fn true_cate(&self) -> Vec<f64> {
        self.data.covariates().row_iter().map(|x| (self.mu1)(x) - (self.mu0)(x)).collect()
    }
}

impl GaussianCateDgp {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if !(self.cate_sd >= 0.0 && self.noise_sd >= 0.0) {
            return Err(Error::InvalidConfig("standard deviations must be nonnegative".into()));
        }
        if !(self.propensity > 0.0 && self.propensity < 1.0) {
            return Err(Error::InvalidConfig(format!("propensity {} outside (0, 1)", self.propensity)));
        }
        if !self.cate_mean.is_finite() || !self.cate_sd.is_finite() || !self.noise_sd.is_finite() {
            return Err(Error::InvalidConfig("DGP parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn mu0(&self) -> CovariateFn<f64> {
        if self.dim >= 2 {
            Arc::new(|x: &[f64]| x[1])
        } else {
            Arc::new(|_: &[f64]| 0.0)
        }
    }

    pub fn cate(&self) -> CovariateFn<f64> {
        let (m, s) = (self.cate_mean, self.cate_sd);
        Arc::new(move |x: &[f64]| m + s * x[0])
    }

    pub fn mu1(&self) -> CovariateFn<f64> {
        let (mu0, cate) = (self.mu0(), self.cate());
        Arc::new(move |x: &[f64]| mu0(x) + cate(x))
    }

    pub fn propensity_fn(&self) -> CovariateFn<f64> {
        let p = self.propensity;
        Arc::new(move |_: &[f64]| p)
    }

    /// `n` i.i.d. rows.
    pub fn generate(&self, n: usize) -> Result<SimulatedData> {
        self.validate()?;
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let mut rng = stream_rng(self.seed, 0);
        let d = self.dim;
        let (mu0, mu1) = (self.mu0(), self.mu1());
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for _ in 0..n {
            let start = x.len();
            x.extend((0..d).map(|_| standard_normal(&mut rng)));
            let row = &x[start..];
            let zi = u8::from(open_unit(&mut rng) < self.propensity);
            let eps = standard_normal(&mut rng);
            let mean = if zi == 1 { mu1(row) } else { mu0(row) };
            y.push(mean + self.noise_sd * eps);
            z.push(zi);
        }
        let covariates = Matrix::new(n, d, x)?;
        Ok(SimulatedData {
            data: ObservationSet::new(covariates, y, z, None)?,
            mu0,
            mu1,
            propensity: self.propensity_fn(),
        })
    }

    /// `n x d` covariate draws, e.g. an unlabeled pool.
    pub fn covariate_pool(&self, m: usize, stream: u64) -> Matrix<f64> {
        let mut rng = stream_rng(self.seed, stream);
        let x = (0..m * self.dim).map(|_| standard_normal(&mut rng)).collect();
        Matrix::new(m, self.dim, x).expect("shape matches")
    }

    pub fn true_wte(&self, alpha: f64) -> Result<f64> {
        closed_form_normal_wte(self.cate_mean, self.cate_sd, alpha)
    }

    /// True `(1 - alpha)`-quantile of the CATE; `-inf` at `alpha = 1`.
    pub fn true_threshold(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        if alpha == 1.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.cate_mean + self.cate_sd * normal_quantile(1.0 - alpha))
    }

    /// Asymptotic variance of the augmented estimator with true nuisances:
    /// the hinge variance over `alpha^2` plus `noise^2 E[h^2] (1/e + 1/(1-e))`.
    /// The hinge moments are integrated numerically.
    pub fn true_sigma2_alpha(&self, alpha: f64) -> Result<f64> {
        self.validate()?;
        check_alpha(alpha)?;
        let s = self.cate_sd;
        let (hinge_var, tail_prob) = if alpha == 1.0 {
            (s * s, 1.0)
        } else if s == 0.0 {
            // Every unit sits at the threshold and is included.
            (0.0, 1.0)
        } else {
            let z = normal_quantile(1.0 - alpha);
            let hi = z.max(0.0) + 40.0;
            let m1 = integrate(|u| (u - z) * normal_pdf(u), z, hi, 1e-14);
            let m2 = integrate(|u| (u - z) * (u - z) * normal_pdf(u), z, hi, 1e-14);
            (s * s * (m2 - m1 * m1), alpha)
        };
        let e = self.propensity;
        let h2 = tail_prob / (alpha * alpha);
        let noise = self.noise_sd * self.noise_sd * h2 * (1.0 / e + 1.0 / (1.0 - e));
        Ok(hinge_var / (alpha * alpha) + noise)
    }
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1) + adaptive(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`, started from 64 panels so narrow
/// features are not skipped by the first coarse estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 64;
    let width = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == PANELS { b } else { lo + width };
            let (fa, fb) = (f(lo), f(hi));
            let (whole, m, fm) = simpson(&f, lo, fa, hi, fb);
            adaptive(&f, lo, fa, hi, fb, whole, m, fm, tol / PANELS as f64, 40)
        })
        .sum()
}

/// Nuisances used inside an experiment.
#[derive(Debug, Clone)]
pub enum SimNuisance {
    /// True functions of the DGP.
    Oracle,
    /// Learners fitted on each replication.
    Fitted(NuisanceConfig<f64>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub k: usize,
    pub level: f64,
    pub nuisance: SimNuisance,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { k: 3, level: 0.95, nuisance: SimNuisance::Oracle }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub point: f64,
    pub variance: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub reps: usize,
    pub n: usize,
    pub alpha: f64,
    pub level: f64,
    pub true_wte: f64,
    pub true_sigma2: f64,
    pub mean_bias: f64,
    /// Monte Carlo standard error of `mean_bias`.
    pub bias_se: f64,
    pub empirical_coverage: f64,
    /// `n Var_MC(point) / true_sigma2`.
    pub variance_ratio: f64,
    pub mean_sigma2_hat: f64,
    pub per_rep: Vec<RepRecord>,
}

fn sample_mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

fn check_budget(n: usize, reps: usize, k: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    if n < 2 * k {
        return Err(Error::InvalidConfig(format!("n = {n} is too small for {k} folds")));
    }
    Ok(())
}

fn rep_data(dgp: &GaussianCateDgp, n: usize, seed: u64, rep: usize) -> Result<SimulatedData> {
    dgp.with_seed(derive_seed(seed, &[0x6461_7461, rep as u64])).generate(n)
}

fn rep_crossfit(sim: &SimulatedData, nuisance: &SimNuisance, k: usize, seed: u64, rep: usize) -> Result<CrossFit<f64>> {
    let fold_seed = derive_seed(seed, &[0x666f_6c64, rep as u64]);
    let config = match nuisance {
        SimNuisance::Oracle => sim.oracle_config(),
        SimNuisance::Fitted(c) => c.clone(),
    };
    CrossFit::fit_with_folds(&sim.data, FoldAssignment::make_folds(sim.data.len(), k, fold_seed)?, &config)
}

/// Coverage experiment at several tail masses on shared replications.
pub fn run_coverage_experiment_multi(
    dgp: &GaussianCateDgp,
    n: usize,
    alphas: &[f64],
    reps: usize,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<SimulationReport>> {
    dgp.validate()?;
    check_budget(n, reps, config.k)?;
    crate::estimators::check_alpha_grid(alphas)?;
    let rows: Vec<Vec<RepRecord>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let sim = rep_data(dgp, n, seed, rep)?;
            let cf = rep_crossfit(&sim, &config.nuisance, config.k, seed, rep)?;
            alphas
                .iter()
                .map(|&alpha| {
                    let est = cf.estimate(&sim.data, alpha, Method::Augmented, EffectDirection::AdverseHigh, None)?;
                    let ci = confidence_interval(&est, config.level, Sided::TwoSided)?;
                    let truth = dgp.true_wte(alpha)?;
                    Ok(RepRecord {
                        rep,
                        point: est.point,
                        variance: est.variance,
                        ci_lower: ci.lower,
                        ci_upper: ci.upper,
                        covered: ci.lower <= truth && truth <= ci.upper,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    alphas
        .iter()
        .enumerate()
        .map(|(j, &alpha)| {
            let per_rep: Vec<RepRecord> = rows.iter().map(|r| r[j].clone()).collect();
            summarize(dgp, n, alpha, config.level, per_rep)
        })
        .collect()
}

/// Coverage, bias and variance calibration of the augmented estimator.
pub fn run_coverage_experiment(
    dgp: &GaussianCateDgp,
    n: usize,
    alpha: f64,
    reps: usize,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<SimulationReport> {
    Ok(run_coverage_experiment_multi(dgp, n, &[alpha], reps, config, seed)?.remove(0))
}

fn summarize(dgp: &GaussianCateDgp, n: usize, alpha: f64, level: f64, per_rep: Vec<RepRecord>) -> Result<SimulationReport> {
    let true_wte = dgp.true_wte(alpha)?;
    let true_sigma2 = dgp.true_sigma2_alpha(alpha)?;
    let points: Vec<f64> = per_rep.iter().map(|r| r.point).collect();
    let (mean_point, var_point) = sample_mean_var(&points);
    let reps = per_rep.len();
    let covered = per_rep.iter().filter(|r| r.covered).count();
    let mean_sigma2_hat = per_rep.iter().map(|r| r.variance).sum::<f64>() / reps as f64;
    Ok(SimulationReport {
        reps,
        n,
        alpha,
        level,
        true_wte,
        true_sigma2,
        mean_bias: mean_point - true_wte,
        bias_se: (var_point / reps as f64).sqrt(),
        empirical_coverage: covered as f64 / reps as f64,
        variance_ratio: n as f64 * var_point / true_sigma2,
        mean_sigma2_hat,
        per_rep,
    })
}

/// One nuisance variant in the efficiency comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub variant: String,
    pub scaled_variance: f64,
    pub ratio: f64,
    pub mean_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub n: usize,
    pub alpha: f64,
    pub reps: usize,
    pub true_sigma2: f64,
    /// Ratios below this value would beat the bound beyond Monte Carlo noise.
    pub floor: f64,
    pub rows: Vec<EfficiencyRow>,
}

impl EfficiencyReport {
    pub fn respects_floor(&self) -> bool {
        self.rows.iter().all(|r| r.ratio >= self.floor)
    }
}

/// `n Var_MC` of the augmented estimator under each nuisance variant, on the same replications.
pub fn run_efficiency_experiment(
    dgp: &GaussianCateDgp,
    n: usize,
    alpha: f64,
    reps: usize,
    k: usize,
    variants: &[(String, SimNuisance)],
    seed: u64,
) -> Result<EfficiencyReport> {
    dgp.validate()?;
    check_alpha(alpha)?;
    check_budget(n, reps, k)?;
    if variants.is_empty() {
        return Err(Error::InvalidConfig("no estimator variants".into()));
    }
    let points: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let sim = rep_data(dgp, n, seed, rep)?;
            variants
                .iter()
                .map(|(_, v)| {
                    let cf = rep_crossfit(&sim, v, k, seed, rep)?;
                    Ok(cf.estimate(&sim.data, alpha, Method::Augmented, EffectDirection::AdverseHigh, None)?.point)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let true_sigma2 = dgp.true_sigma2_alpha(alpha)?;
    let truth = dgp.true_wte(alpha)?;
    let rows = variants
        .iter()
        .enumerate()
        .map(|(j, (name, _))| {
            let col: Vec<f64> = points.iter().map(|p| p[j]).collect();
            let (mean, var) = sample_mean_var(&col);
            EfficiencyRow {
                variant: name.clone(),
                scaled_variance: n as f64 * var,
                ratio: n as f64 * var / true_sigma2,
                mean_bias: mean - truth,
            }
        })
        .collect();
    Ok(EfficiencyReport { n, alpha, reps, true_sigma2, floor: 0.9, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityConfig {
    pub ns: Vec<usize>,
    pub gamma: f64,
    pub amplitude: f64,
    pub alpha: f64,
    pub reps: usize,
    pub k: usize,
}

impl Default for OrthogonalityConfig {
    fn default() -> Self {
        Self { ns: vec![1000, 4000, 16000], gamma: 0.25, amplitude: 1.0, alpha: 0.5, reps: 200, k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityRow {
    pub method: Method,
    pub n: usize,
    pub mean_error: f64,
    /// `sqrt(n) |mean_error|`.
    pub scaled_bias: f64,
    /// Monte Carlo standard error of `sqrt(n) mean_error`.
    pub scaled_bias_se: f64,
}

/// OLS fit of per-replication `sqrt(n) (estimate - truth)` on `ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendFit {
    pub slope: f64,
    pub slope_se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl TrendFit {
    pub fn contains_zero(&self) -> bool {
        self.ci_lower <= 0.0 && 0.0 <= self.ci_upper
    }
}

/// Least-squares slope with a 95% normal-theory interval.
pub fn ols_trend(x: &[f64], y: &[f64]) -> TrendFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = (rss / (n - 2.0) / sxx).sqrt();
    let z = normal_quantile(0.975);
    TrendFit { slope, slope_se, ci_lower: slope - z * slope_se, ci_upper: slope + z * slope_se }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityReport {
    pub config: OrthogonalityConfig,
    pub true_wte: f64,
    pub rows: Vec<OrthogonalityRow>,
    pub trends: Vec<(Method, TrendFit)>,
}

impl OrthogonalityReport {
    pub fn row(&self, method: Method, n: usize) -> Option<&OrthogonalityRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n)
    }

    pub fn trend(&self, method: Method) -> Option<TrendFit> {
        self.trends.iter().find(|(m, _)| *m == method).map(|(_, t)| *t)
    }

    /// Whether `sqrt(n) |bias|` strictly increases along the sample-size grid.
    pub fn strictly_increasing(&self, method: Method) -> bool {
        let v: Vec<f64> = self.config.ns.iter().filter_map(|&n| self.row(method, n)).map(|r| r.scaled_bias).collect();
        v.len() == self.config.ns.len() && v.windows(2).all(|w| w[1] > w[0])
    }
}

const METHODS: [Method; 3] = [Method::Augmented, Method::Dm, Method::Ipw];

/// Estimates with outcome and propensity oracles perturbed by errors of
/// sup-norm `amplitude n^(-gamma)`. The perturbation shapes are drawn once
/// from the master seed and reused across replications and sample sizes.
pub fn run_orthogonality_experiment(
    dgp: &GaussianCateDgp,
    config: &OrthogonalityConfig,
    seed: u64,
) -> Result<OrthogonalityReport> {
    dgp.validate()?;
    check_alpha(config.alpha)?;
    if config.ns.is_empty() || config.reps < 2 {
        return Err(Error::InvalidConfig("need a nonempty n grid and at least 2 reps".into()));
    }
    for &n in &config.ns {
        check_budget(n, config.reps, config.k)?;
    }
    if !(config.gamma > 0.0 && config.amplitude >= 0.0) {
        return Err(Error::InvalidConfig("gamma must be positive and amplitude nonnegative".into()));
    }
    let truth = dgp.true_wte(config.alpha)?;
    let d = dgp.dim;
    let nuisances = |n: usize| {
        let mu0 = corrupt_oracle(dgp.mu0(), config.gamma, config.amplitude, n, d, derive_seed(seed, &[0x6d75_30])).into_fn();
        let mu1 = corrupt_oracle(dgp.mu1(), config.gamma, config.amplitude, n, d, derive_seed(seed, &[0x6d75_31])).into_fn();
        let e = corrupt_oracle(dgp.propensity_fn(), config.gamma, config.amplitude, n, d, derive_seed(seed, &[0x6573])).into_fn();
        NuisanceConfig::oracle(mu0, mu1, e)
    };
    // errors[n_idx][rep][method]
    let errors: Vec<Vec<[f64; 3]>> = config
        .ns
        .iter()
        .enumerate()
        .map(|(ni, &n)| {
            let cfg = nuisances(n);
            (0..config.reps)
                .into_par_iter()
                .map(|rep| {
                    let rep_seed = derive_seed(seed, &[ni as u64, rep as u64]);
                    let sim = rep_data(dgp, n, rep_seed, 0)?;
                    let folds = FoldAssignment::make_folds(n, config.k, derive_seed(rep_seed, &[1]))?;
                    let cf = CrossFit::fit_with_folds(&sim.data, folds, &cfg)?;
                    let mut out = [0.0; 3];
                    for (slot, &m) in out.iter_mut().zip(&METHODS) {
                        *slot = cf.estimate(&sim.data, config.alpha, m, EffectDirection::AdverseHigh, None)?.point - truth;
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut trends = Vec::new();
    for (mi, &method) in METHODS.iter().enumerate() {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (ni, &n) in config.ns.iter().enumerate() {
            let root = (n as f64).sqrt();
            let col: Vec<f64> = errors[ni].iter().map(|e| e[mi]).collect();
            let (mean, var) = sample_mean_var(&col);
            rows.push(OrthogonalityRow {
                method,
                n,
                mean_error: mean,
                scaled_bias: root * mean.abs(),
                scaled_bias_se: root * (var / col.len() as f64).sqrt(),
            });
            xs.extend(std::iter::repeat_n((n as f64).ln(), col.len()));
            ys.extend(col.iter().map(|e| root * e));
        }
        trends.push((method, ols_trend(&xs, &ys)));
    }
    Ok(OrthogonalityReport { config: config.clone(), true_wte: truth, rows, trends })
}

/// Monte Carlo estimate of the true asymptotic variance from `draws` units, with its standard error.
pub fn monte_carlo_sigma2(dgp: &GaussianCateDgp, alpha: f64, draws: usize, seed: u64) -> Result<(f64, f64)> {
    dgp.validate()?;
    let q = dgp.true_threshold(alpha)?;
    let e = dgp.propensity;
    let chunks = 64usize;
    let per = draws.div_ceil(chunks);
    // Per-unit values of hinge/alpha and kappa; their variances add since the cross moment vanishes.
    let parts: Vec<(Vec<f64>, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = per.min(draws.saturating_sub(c * per));
            let mut psi = Vec::with_capacity(len);
            let mut sum = 0.0;
            for _ in 0..len {
                let x1 = standard_normal(&mut rng);
                let zi = open_unit(&mut rng) < e;
                let eps = dgp.noise_sd * standard_normal(&mut rng);
                let cate = dgp.cate_mean + dgp.cate_sd * x1;
                let (tail, h) = if q.is_infinite() {
                    (cate, 1.0)
                } else if cate >= q {
                    ((cate - q) / alpha, 1.0 / alpha)
                } else {
                    (0.0, 0.0)
                };
                let kappa = if zi { h * eps / e } else { -h * eps / (1.0 - e) };
                psi.push(tail + kappa);
                sum += tail + kappa;
            }
            (psi, sum)
        })
        .collect();
    let total = parts.iter().map(|p| p.1).sum::<f64>() / draws as f64;
    let sq: Vec<f64> = parts.iter().flat_map(|p| p.0.iter().map(|v| (v - total).powi(2))).collect();
    let var = sq.iter().sum::<f64>() / (draws as f64 - 1.0);
    let (_, var_sq) = sample_mean_var(&sq);
    Ok((var, (var_sq / draws as f64).sqrt()))
}
