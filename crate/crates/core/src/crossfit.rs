//! K-fold cross-fitting of the augmented worst-case effect estimator.
//!
//! For each fold the nuisances are fitted on the complement (the auxiliary
//! rows) and evaluated on the fold itself (the main rows). The fold estimate
//! is the empirical CVaR of the predicted CATE on the main rows plus the mean
//! augmentation term; fold estimates and variances are averaged with equal
//! weights.
//!
//! The lower-tail direction is handled by flipping the sign of the CATE-scale
//! quantities (outcomes and outcome predictions), running the upper-tail
//! computation, and flipping the result back.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::cvar::{check_alpha, empirical_cvar, empirical_quantile};
use crate::data::{validate, EffectDirection, Matrix, ObservationSet, UnlabeledCovariates};
use crate::error::{Error, Result};
use crate::estimators::{Method, WteEstimate};
use crate::nuisance::{
    fit_outcome_model, fit_propensity_model, Arm, ClippedPropensity, NuisanceConfig, OutcomeModel, SharedRegressor,
};
use crate::rng::{derive_seed, stream_rng};
use crate::scalar::{population_variance, stable_mean, Scalar};

/// Balanced random partition of `0..n` into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
    seed: u64,
}

impl FoldAssignment {
    /// Shuffles `0..n` with `seed` and deals positions round-robin, so fold sizes differ by at most one.
    pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 || k > n {
            return Err(Error::KOutOfRange { k, n });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(seed, 0x666f_6c64));
        let mut fold_of = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            fold_of[i] = pos % k;
        }
        Ok(Self { fold_of, k, seed })
    }

    /// Explicit assignment; every fold must be nonempty.
    pub fn from_labels(fold_of: Vec<usize>, k: usize) -> Result<Self> {
        let n = fold_of.len();
        if k < 2 || k > n || fold_of.iter().any(|&f| f >= k) {
            return Err(Error::KOutOfRange { k, n });
        }
        let mut seen = vec![false; k];
        fold_of.iter().for_each(|&f| seen[f] = true);
        if seen.contains(&false) {
            return Err(Error::InvalidConfig("every fold must be nonempty".into()));
        }
        Ok(Self { fold_of, k, seed: 0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rows of fold `k` (the main sample), in increasing order.
    pub fn main_indices(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == k).collect()
    }

    /// Rows outside fold `k` (the auxiliary sample), in increasing order.
    pub fn aux_indices(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != k).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.fold_of.iter().for_each(|&f| sizes[f] += 1);
        sizes
    }
}

/// Outcome and propensity models fitted on one fold's auxiliary rows.
#[derive(Clone, Debug)]
pub struct FoldModels<T: Scalar> {
    pub mu0: SharedRegressor<T>,
    pub mu1: SharedRegressor<T>,
    pub e: ClippedPropensity<T>,
}

impl<T: Scalar> FoldModels<T> {
    /// Predicted CATE `mu1 - mu0`, oriented so the worst case is the upper tail.
    pub fn oriented_cate(&self, x: &Matrix<T>, direction: EffectDirection) -> Vec<T> {
        let s: T = direction.orientation();
        self.mu1.predict(x).into_iter().zip(self.mu0.predict(x)).map(|(a, b)| s * (a - b)).collect()
    }
}

/// Fold nuisances plus the estimated CATE quantile `q_hat` (in the oriented frame).
#[derive(Clone, Debug)]
pub struct NuisanceFit<T: Scalar> {
    pub models: FoldModels<T>,
    pub q_hat: T,
    pub alpha: T,
    pub direction: EffectDirection,
}

impl<T: Scalar> NuisanceFit<T> {
    /// Threshold weight `(1/alpha) 1{cate >= q_hat}` for an oriented CATE value.
    pub fn threshold_weight(&self, oriented_cate: T) -> T {
        threshold_weight(oriented_cate, self.q_hat, self.alpha)
    }
}

#[inline]
pub(crate) fn threshold_weight<T: Scalar>(oriented_cate: T, q_hat: T, alpha: T) -> T {
    if oriented_cate >= q_hat {
        T::one() / alpha
    } else {
        T::zero()
    }
}

/// Per-fold outputs. For the IPW baseline `cvar_part` is zero and the
/// weighted-outcome mean is carried in `kappa_mean`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldEstimate<T> {
    pub fold: usize,
    pub omega_k: T,
    pub sigma2_k: T,
    pub fold_size: usize,
    pub cvar_part: T,
    pub kappa_mean: T,
    /// Quantile threshold used in the hinge and threshold weights (oriented frame).
    pub q_hat: T,
}

/// Augmentation term `h (Z/e (Y - mu1) - (1-Z)/(1-e) (Y - mu0))`.
#[inline]
pub fn kappa<T: Scalar>(y: T, z: u8, mu0_x: T, mu1_x: T, e_x: T, h_x: T) -> T {
    if h_x == T::zero() {
        return T::zero();
    }
    let term = if z == 1 { (y - mu1_x) / e_x } else { -(y - mu0_x) / (T::one() - e_x) };
    h_x * term
}

/// Fits outcome models per arm and the propensity on the auxiliary rows of fold `k`.
pub fn fit_fold_models<T: Scalar>(
    data: &ObservationSet<T>,
    folds: &FoldAssignment,
    k: usize,
    config: &NuisanceConfig<T>,
) -> Result<FoldModels<T>> {
    let aux = folds.aux_indices(k);
    let x = data.covariates().select_rows(&aux);
    let y: Vec<T> = aux.iter().map(|&i| data.outcomes()[i]).collect();
    let z: Vec<u8> = aux.iter().map(|&i| data.treatments()[i]).collect();
    let treated: Vec<bool> = z.iter().map(|&v| v == 1).collect();
    let control: Vec<bool> = treated.iter().map(|b| !b).collect();
    let mu0 = fit_outcome_model(config, &x, &y, &control, Arm::Control)?;
    let mu1 = fit_outcome_model(config, &x, &y, &treated, Arm::Treated)?;
    let e = fit_propensity_model(config, &x, &z)?;
    Ok(FoldModels { mu0, mu1, e })
}

/// `(1 - alpha)`-quantile of the oriented CATE predictions on the quantile pool;
/// `-inf` at `alpha = 1` so every row is in the tail.
pub fn estimate_threshold<T: Scalar>(
    models: &FoldModels<T>,
    pool_x: &Matrix<T>,
    alpha: T,
    direction: EffectDirection,
) -> Result<T> {
    check_alpha(alpha)?;
    if alpha == T::one() {
        return Ok(T::neg_infinity());
    }
    empirical_quantile(&models.oriented_cate(pool_x, direction), T::one() - alpha)
}

/// Nuisances and threshold for fold `k`. The quantile pool is the auxiliary
/// covariates unless an unlabeled pool is supplied.
pub fn fit_fold_nuisances<T: Scalar>(
    data: &ObservationSet<T>,
    folds: &FoldAssignment,
    k: usize,
    alpha: T,
    config: &NuisanceConfig<T>,
    pool: Option<&UnlabeledCovariates<T>>,
    direction: EffectDirection,
) -> Result<NuisanceFit<T>> {
    check_alpha(alpha)?;
    let models = fit_fold_models(data, folds, k, config)?;
    with_threshold(data, folds, k, models, alpha, pool, direction)
}

fn with_threshold<T: Scalar>(
    data: &ObservationSet<T>,
    folds: &FoldAssignment,
    k: usize,
    models: FoldModels<T>,
    alpha: T,
    pool: Option<&UnlabeledCovariates<T>>,
    direction: EffectDirection,
) -> Result<NuisanceFit<T>> {
    let q_hat = match pool {
        Some(p) => {
            p.check_dim(data.dim())?;
            estimate_threshold(&models, p.covariates(), alpha, direction)?
        }
        None => {
            let aux_x = data.covariates().select_rows(&folds.aux_indices(k));
            estimate_threshold(&models, &aux_x, alpha, direction)?
        }
    };
    Ok(NuisanceFit { models, q_hat, alpha, direction })
}

/// Main-fold quantities in the oriented frame.
#[derive(Debug, Clone)]
pub(crate) struct FoldTerms<T> {
    pub cate: Vec<T>,
    pub h: Vec<T>,
    pub kappa: Vec<T>,
    /// Oriented outcomes and treatment contrasts for the IPW baseline.
    pub ipw: Vec<T>,
}

pub(crate) fn fold_terms<T: Scalar>(
    data: &ObservationSet<T>,
    main: &[usize],
    fit: &NuisanceFit<T>,
) -> FoldTerms<T> {
    let s: T = fit.direction.orientation();
    let x = data.covariates().select_rows(main);
    let mu0: Vec<T> = fit.models.mu0.predict(&x).into_iter().map(|v| s * v).collect();
    let mu1: Vec<T> = fit.models.mu1.predict(&x).into_iter().map(|v| s * v).collect();
    let e = fit.models.e.predict_prob(&x);
    let mut terms = FoldTerms {
        cate: Vec::with_capacity(main.len()),
        h: Vec::with_capacity(main.len()),
        kappa: Vec::with_capacity(main.len()),
        ipw: Vec::with_capacity(main.len()),
    };
    for (j, &i) in main.iter().enumerate() {
        let y = s * data.outcomes()[i];
        let z = data.treatments()[i];
        let cate = mu1[j] - mu0[j];
        let h = fit.threshold_weight(cate);
        terms.cate.push(cate);
        terms.h.push(h);
        terms.kappa.push(kappa(y, z, mu0[j], mu1[j], e[j], h));
        let contrast = if z == 1 { T::one() / e[j] } else { -T::one() / (T::one() - e[j]) };
        terms.ipw.push(h * y * contrast);
    }
    terms
}

/// `Var[(cate - q)_+]`; at `q = -inf` the hinge is the identity shifted by `-q`, so this is `Var[cate]`.
pub(crate) fn hinge_variance<T: Scalar>(cate: &[T], q_hat: T) -> T {
    if q_hat.is_infinite() {
        return population_variance(cate);
    }
    let hinge: Vec<T> = cate.iter().map(|&c| (c - q_hat).max(T::zero())).collect();
    population_variance(&hinge)
}

/// Augmented estimate and plug-in variance on the main rows of fold `k`.
pub fn fold_estimate<T: Scalar>(
    data: &ObservationSet<T>,
    folds: &FoldAssignment,
    k: usize,
    fit: &NuisanceFit<T>,
) -> Result<FoldEstimate<T>> {
    let main = folds.main_indices(k);
    if main.len() < 2 {
        return Err(Error::FoldTooSmall { fold: k, size: main.len() });
    }
    let alpha = fit.alpha;
    let terms = fold_terms(data, &main, fit);
    let cvar = empirical_cvar(&terms.cate, alpha)?.value;
    let kappa_mean = stable_mean(&terms.kappa);
    let sigma2 = hinge_variance(&terms.cate, fit.q_hat) / (alpha * alpha) + population_variance(&terms.kappa);
    let s: T = fit.direction.orientation();
    Ok(FoldEstimate {
        fold: k,
        omega_k: s * cvar + s * kappa_mean,
        sigma2_k: sigma2.max(T::zero()),
        fold_size: main.len(),
        cvar_part: s * cvar,
        kappa_mean: s * kappa_mean,
        q_hat: fit.q_hat,
    })
}

fn needs_both_arms<T>(config: &NuisanceConfig<T>) -> bool {
    !matches!(config.outcome_model, OutcomeModel::Oracle { .. }) || config.propensity_model.is_estimated()
}

/// Nuisance models fitted once per fold; reusable across tail masses,
/// directions and estimator variants.
#[derive(Clone, Debug)]
pub struct CrossFit<T: Scalar> {
    folds: FoldAssignment,
    models: Vec<FoldModels<T>>,
}

impl<T: Scalar> CrossFit<T> {
    /// Fits every fold in parallel. Fold `k` uses nuisance seed `derive_seed(seed, [k])`.
    pub fn fit(data: &ObservationSet<T>, k: usize, config: &NuisanceConfig<T>, seed: u64) -> Result<Self> {
        let folds = FoldAssignment::make_folds(data.len(), k, seed)?;
        Self::fit_with_folds(data, folds, config)
    }

    pub fn fit_with_folds(data: &ObservationSet<T>, folds: FoldAssignment, config: &NuisanceConfig<T>) -> Result<Self> {
        config.validate()?;
        if folds.n() != data.len() {
            return Err(Error::InvalidConfig("fold assignment length differs from the sample".into()));
        }
        validate(data, needs_both_arms(config))?;
        let models = (0..folds.k())
            .into_par_iter()
            .map(|k| {
                let cfg = config.with_seed(derive_seed(folds.seed(), &[k as u64, config.seed]));
                fit_fold_models(data, &folds, k, &cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { folds, models })
    }

    /// Assembles a cross-fit from externally supplied per-fold models.
    pub fn from_parts(folds: FoldAssignment, models: Vec<FoldModels<T>>) -> Result<Self> {
        if models.len() != folds.k() {
            return Err(Error::InvalidConfig(format!("{} fold models for {} folds", models.len(), folds.k())));
        }
        Ok(Self { folds, models })
    }

    pub fn folds(&self) -> &FoldAssignment {
        &self.folds
    }

    pub fn models(&self) -> &[FoldModels<T>] {
        &self.models
    }

    /// Per-fold nuisance fits including the threshold at `alpha`.
    pub fn nuisance_fits(
        &self,
        data: &ObservationSet<T>,
        alpha: T,
        pool: Option<&UnlabeledCovariates<T>>,
        direction: EffectDirection,
    ) -> Result<Vec<NuisanceFit<T>>> {
        check_alpha(alpha)?;
        (0..self.folds.k())
            .map(|k| with_threshold(data, &self.folds, k, self.models[k].clone(), alpha, pool, direction))
            .collect()
    }

    /// Cross-fitted estimate of the requested kind.
    pub fn estimate(
        &self,
        data: &ObservationSet<T>,
        alpha: T,
        method: Method,
        direction: EffectDirection,
        pool: Option<&UnlabeledCovariates<T>>,
    ) -> Result<WteEstimate<T>> {
        let fits = self.nuisance_fits(data, alpha, pool, direction)?;
        let fold_estimates = fits
            .par_iter()
            .enumerate()
            .map(|(k, fit)| match method {
                Method::Augmented => fold_estimate(data, &self.folds, k, fit),
                Method::Dm => crate::estimators::dm_fold(data, &self.folds, k, fit),
                Method::Ipw => crate::estimators::ipw_fold(data, &self.folds, k, fit),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WteEstimate::from_folds(alpha, data.len(), fold_estimates, method, direction))
    }
}

/// Cross-fitted augmented estimate of the worst-case effect at tail mass `alpha`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_wte<T: Scalar>(
    data: &ObservationSet<T>,
    alpha: T,
    k: usize,
    config: &NuisanceConfig<T>,
    direction: EffectDirection,
    pool: Option<&UnlabeledCovariates<T>>,
    seed: u64,
) -> Result<WteEstimate<T>> {
    check_alpha(alpha)?;
    CrossFit::fit(data, k, config, seed)?.estimate(data, alpha, Method::Augmented, direction, pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::nuisance::{CovariateFn, HyperGrid, PropensitySpec};

    #[test]
    fn folds_are_balanced_and_deterministic() {
        let f = FoldAssignment::make_folds(10, 3, 7).unwrap();
        let mut sizes = f.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert_eq!(f, FoldAssignment::make_folds(10, 3, 7).unwrap());
        assert_ne!(f, FoldAssignment::make_folds(10, 3, 8).unwrap());
        let singletons = FoldAssignment::make_folds(3, 3, 1).unwrap();
        assert_eq!(singletons.fold_sizes(), vec![1, 1, 1]);
        assert_eq!(FoldAssignment::make_folds(3, 4, 1).unwrap_err(), Error::KOutOfRange { k: 4, n: 3 });
        assert!(FoldAssignment::make_folds(3, 1, 1).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(5.0, 1, 0.0, 1.0, 0.5, 0.0), 0.0);
        assert_eq!(kappa(1.0, 1, 0.3, 1.0, 0.5, 2.0), 0.0);
        assert!((kappa(1.3_f64, 1, 0.0, 1.0, 0.5, 2.0) - 1.2).abs() < 1e-12);
        // Control arm: -(y - mu0)/(1 - e) * h
        assert!((kappa(1.0_f64, 0, 0.5, 9.0, 0.75, 1.0) + 2.0).abs() < 1e-12);
    }

    fn constant_data() -> ObservationSet<f64> {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        ObservationSet::new(x, vec![4.0; 4], vec![0, 1, 0, 1], None).unwrap()
    }

    #[test]
    fn degenerate_constant_outcomes() {
        let data = constant_data();
        let folds = FoldAssignment::from_labels(vec![0, 0, 1, 1], 2).unwrap();
        let cfg = NuisanceConfig { propensity_model: PropensitySpec::KnownConstant(0.5), ..NuisanceConfig::default() };
        let fit = fit_fold_nuisances(&data, &folds, 0, 0.5, &cfg, None, EffectDirection::AdverseHigh).unwrap();
        for r in data.covariates().row_iter() {
            assert!((fit.models.mu0.predict_row(r) - 4.0).abs() < 1e-12);
            assert!((fit.models.mu1.predict_row(r) - 4.0).abs() < 1e-12);
        }
        assert!(fit.q_hat.abs() < 1e-12);
        let est = fold_estimate(&data, &folds, 0, &fit).unwrap();
        assert!(est.omega_k.abs() < 1e-12);
        assert!(est.sigma2_k.abs() < 1e-20);
    }

    #[test]
    fn full_tail_uses_sentinel_threshold() {
        let data = constant_data();
        let folds = FoldAssignment::from_labels(vec![0, 0, 1, 1], 2).unwrap();
        let cfg = NuisanceConfig { propensity_model: PropensitySpec::KnownConstant(0.5), ..NuisanceConfig::default() };
        let fit = fit_fold_nuisances(&data, &folds, 1, 1.0, &cfg, None, EffectDirection::AdverseHigh).unwrap();
        assert_eq!(fit.q_hat, f64::NEG_INFINITY);
        for c in [-1e300, 0.0, 5.0] {
            assert_eq!(fit.threshold_weight(c), 1.0);
        }
    }

    #[test]
    fn zero_constant_data_gives_zero_estimate() {
        // Y = 0 in both arms, outcome models identically zero.
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let data = ObservationSet::new(x, vec![0.0; 4], vec![0, 1, 0, 1], None).unwrap();
        let folds = FoldAssignment::from_labels(vec![0, 1, 1, 0], 2).unwrap();
        let zero: CovariateFn<f64> = Arc::new(|_| 0.0);
        let cfg = NuisanceConfig::oracle(zero.clone(), zero, Arc::new(|_| 0.5));
        for k in 0..2 {
            let fit = fit_fold_nuisances(&data, &folds, k, 0.5, &cfg, None, EffectDirection::AdverseHigh).unwrap();
            let est = fold_estimate(&data, &folds, k, &fit).unwrap();
            assert_eq!(est.omega_k, 0.0);
            assert_eq!(est.sigma2_k, 0.0);
        }
    }

    #[test]
    fn singleton_fold_is_too_small() {
        let data = constant_data();
        let folds = FoldAssignment::from_labels(vec![0, 1, 1, 1], 2).unwrap();
        let zero: CovariateFn<f64> = Arc::new(|_| 0.0);
        let cfg = NuisanceConfig::oracle(zero.clone(), zero, Arc::new(|_| 0.5));
        let fit = fit_fold_nuisances(&data, &folds, 0, 0.5, &cfg, None, EffectDirection::AdverseHigh).unwrap();
        assert_eq!(fold_estimate(&data, &folds, 0, &fit).unwrap_err(), Error::FoldTooSmall { fold: 0, size: 1 });
    }

    #[test]
    fn auxiliary_without_treated_rows_fails() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let data = ObservationSet::new(x, vec![1.0, 2.0, 3.0, 4.0], vec![1, 1, 0, 0], None).unwrap();
        let folds = FoldAssignment::from_labels(vec![0, 0, 1, 1], 2).unwrap();
        let cfg = NuisanceConfig::<f64>::default();
        assert!(matches!(
            fit_fold_nuisances(&data, &folds, 0, 0.5, &cfg, None, EffectDirection::AdverseHigh),
            Err(Error::InsufficientArmSamples { found: 0, .. })
        ));
    }

    #[test]
    fn unlabeled_pool_drives_the_threshold() {
        let x = Matrix::from_rows(&(0..8).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let data = ObservationSet::new(x, vec![0.0; 8], vec![0, 1, 0, 1, 0, 1, 0, 1], None).unwrap();
        let folds = FoldAssignment::from_labels(vec![0, 1, 0, 1, 0, 1, 0, 1], 2).unwrap();
        let ident: CovariateFn<f64> = Arc::new(|x| x[0]);
        let zero: CovariateFn<f64> = Arc::new(|_| 0.0);
        let cfg = NuisanceConfig::oracle(zero, ident, Arc::new(|_| 0.5));
        let pool = UnlabeledCovariates::new(Matrix::column_vector((1..=100).map(f64::from).collect())).unwrap();
        let fit = fit_fold_nuisances(&data, &folds, 0, 0.25, &cfg, Some(&pool), EffectDirection::AdverseHigh).unwrap();
        assert_eq!(fit.q_hat, 75.0);
        let fit = fit_fold_nuisances(&data, &folds, 0, 0.25, &cfg, None, EffectDirection::AdverseHigh).unwrap();
        // Auxiliary covariates of fold 0 are 1, 3, 5, 7.
        assert_eq!(fit.q_hat, 5.0);
        let bad = UnlabeledCovariates::new(Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert!(fit_fold_nuisances(&data, &folds, 0, 0.25, &cfg, Some(&bad), EffectDirection::AdverseHigh).is_err());
    }

    #[test]
    fn estimate_requires_both_arms_for_fitted_models() {
        let x = Matrix::from_rows(&(0..6).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let data = ObservationSet::new(x, vec![0.0; 6], vec![1; 6], None).unwrap();
        let cfg = NuisanceConfig::<f64> { hyper_grid: HyperGrid::default(), ..NuisanceConfig::default() };
        assert!(matches!(
            estimate_wte(&data, 0.5, 2, &cfg, EffectDirection::AdverseHigh, None, 1),
            Err(Error::Data(crate::error::DataError::BothArmsRequired))
        ));
    }
}
