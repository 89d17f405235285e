//! Estimator catalogue (augmented, direct method, inverse propensity
//! weighting), normal-theory confidence intervals and per-observation
//! influence values.
//!
//! Only the augmented estimator has a calibrated variance. The DM and IPW
//! variances are naive plug-ins and are labeled as such in every report.

use serde::Serialize;

use crate::crossfit::{fold_terms, hinge_variance, CrossFit, FoldAssignment, FoldEstimate, NuisanceFit};
use crate::cvar::{check_alpha, empirical_cvar};
use crate::data::{EffectDirection, ObservationSet, UnlabeledCovariates};
use crate::error::{Error, Result};
use crate::normal::normal_quantile;
use crate::nuisance::NuisanceConfig;
use crate::scalar::{population_variance, stable_mean, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Augmented,
    Dm,
    Ipw,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Augmented => "augmented",
            Method::Dm => "dm",
            Method::Ipw => "ipw",
        }
    }

    /// Whether the reported variance is the calibrated asymptotic variance.
    pub fn variance_is_calibrated(self) -> bool {
        matches!(self, Method::Augmented)
    }
}

/// Cross-fitted estimate at one tail mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WteEstimate<T> {
    pub alpha: T,
    pub point: T,
    pub variance: T,
    pub n: usize,
    pub folds: Vec<FoldEstimate<T>>,
    pub method: Method,
    pub direction: EffectDirection,
}

impl<T: Scalar> WteEstimate<T> {
    /// Unweighted average over folds.
    pub(crate) fn from_folds(
        alpha: T,
        n: usize,
        folds: Vec<FoldEstimate<T>>,
        method: Method,
        direction: EffectDirection,
    ) -> Self {
        let point = stable_mean(&folds.iter().map(|f| f.omega_k).collect::<Vec<_>>());
        let variance = stable_mean(&folds.iter().map(|f| f.sigma2_k).collect::<Vec<_>>()).max(T::zero());
        Self { alpha, point, variance, n, folds, method, direction }
    }

    pub fn std_error(&self) -> T {
        (self.variance / T::of_usize(self.n)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    TwoSided,
    /// `(-inf, upper]`
    UpperOnly,
    /// `[lower, +inf)`
    LowerOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval<T> {
    pub lower: T,
    pub upper: T,
    pub level: T,
    pub sided: Sided,
}

/// Normal-theory interval `point +/- z sigma / sqrt(n)`.
pub fn confidence_interval<T: Scalar>(est: &WteEstimate<T>, level: T, sided: Sided) -> Result<ConfidenceInterval<T>> {
    if !(level > T::zero() && level < T::one()) {
        return Err(Error::LevelOutOfRange(level.as_f64()));
    }
    if !(est.variance >= T::zero()) || est.n < 2 {
        return Err(Error::InvalidConfig("interval needs a nonnegative variance and n >= 2".into()));
    }
    let lv = level.as_f64();
    let z = T::of(match sided {
        Sided::TwoSided => normal_quantile(1.0 - (1.0 - lv) / 2.0),
        Sided::UpperOnly | Sided::LowerOnly => normal_quantile(lv),
    });
    let half = z * est.std_error();
    let (lower, upper) = match sided {
        Sided::TwoSided => (est.point - half, est.point + half),
        Sided::UpperOnly => (T::neg_infinity(), est.point + half),
        Sided::LowerOnly => (est.point - half, T::infinity()),
    };
    Ok(ConfidenceInterval { lower, upper, level, sided })
}

pub(crate) fn dm_fold<T: Scalar>(
    data: &ObservationSet<T>,
    folds: &FoldAssignment,
    k: usize,
    fit: &NuisanceFit<T>,
) -> Result<FoldEstimate<T>> {
    let main = folds.main_indices(k);
    if main.len() < 2 {
        return Err(Error::FoldTooSmall { fold: k, size: main.len() });
    }
    let terms = fold_terms(data, &main, fit);
    let cvar = empirical_cvar(&terms.cate, fit.alpha)?.value;
    let s: T = fit.direction.orientation();
    Ok(FoldEstimate {
        fold: k,
        omega_k: s * cvar,
        sigma2_k: hinge_variance(&terms.cate, fit.q_hat) / (fit.alpha * fit.alpha),
        fold_size: main.len(),
        cvar_part: s * cvar,
        kappa_mean: T::zero(),
        q_hat: fit.q_hat,
    })
}

/// Mean and variance of `h Y (Z/e - (1-Z)/(1-e))` over one fold.
pub fn ipw_mean<T: Scalar>(y: &[T], z: &[u8], e: &[T], h: &[T]) -> (T, T) {
    let summand: Vec<T> = (0..y.len())
        .map(|i| {
            let contrast = if z[i] == 1 { T::one() / e[i] } else { -T::one() / (T::one() - e[i]) };
            h[i] * y[i] * contrast
        })
        .collect();
    (stable_mean(&summand), population_variance(&summand))
}

pub(crate) fn ipw_fold<T: Scalar>(
    data: &ObservationSet<T>,
    folds: &FoldAssignment,
    k: usize,
    fit: &NuisanceFit<T>,
) -> Result<FoldEstimate<T>> {
    let main = folds.main_indices(k);
    if main.len() < 2 {
        return Err(Error::FoldTooSmall { fold: k, size: main.len() });
    }
    let terms = fold_terms(data, &main, fit);
    let s: T = fit.direction.orientation();
    let mean = s * stable_mean(&terms.ipw);
    Ok(FoldEstimate {
        fold: k,
        omega_k: mean,
        sigma2_k: population_variance(&terms.ipw),
        fold_size: main.len(),
        cvar_part: T::zero(),
        kappa_mean: mean,
        q_hat: fit.q_hat,
    })
}

/// Direct-method baseline: cross-fitted empirical CVaR of the predicted CATE.
pub fn dm_estimate<T: Scalar>(
    data: &ObservationSet<T>,
    alpha: T,
    k: usize,
    config: &NuisanceConfig<T>,
    direction: EffectDirection,
    seed: u64,
) -> Result<WteEstimate<T>> {
    check_alpha(alpha)?;
    CrossFit::fit(data, k, config, seed)?.estimate(data, alpha, Method::Dm, direction, None)
}

/// Inverse-propensity-weighted baseline.
pub fn ipw_estimate<T: Scalar>(
    data: &ObservationSet<T>,
    alpha: T,
    k: usize,
    config: &NuisanceConfig<T>,
    direction: EffectDirection,
    seed: u64,
) -> Result<WteEstimate<T>> {
    check_alpha(alpha)?;
    CrossFit::fit(data, k, config, seed)?.estimate(data, alpha, Method::Ipw, direction, None)
}

/// Estimated influence value of every observation, in row order, using the
/// fold-local nuisances and the cross-fitted point estimate.
pub fn influence_values_from_fit<T: Scalar>(
    crossfit: &CrossFit<T>,
    data: &ObservationSet<T>,
    alpha: T,
    direction: EffectDirection,
    pool: Option<&UnlabeledCovariates<T>>,
) -> Result<Vec<T>> {
    let est = crossfit.estimate(data, alpha, Method::Augmented, direction, pool)?;
    let fits = crossfit.nuisance_fits(data, alpha, pool, direction)?;
    let s: T = direction.orientation();
    let oriented_point = s * est.point;
    let mut psi = vec![T::zero(); data.len()];
    for (k, fit) in fits.iter().enumerate() {
        let main = crossfit.folds().main_indices(k);
        let terms = fold_terms(data, &main, fit);
        for (j, &i) in main.iter().enumerate() {
            // At alpha = 1 the threshold is -inf and hinge + threshold is the CATE itself.
            let tail = if fit.q_hat.is_infinite() {
                terms.cate[j]
            } else {
                (terms.cate[j] - fit.q_hat).max(T::zero()) / alpha + fit.q_hat
            };
            psi[i] = s * (tail - oriented_point + terms.kappa[j]);
        }
    }
    Ok(psi)
}

/// [`influence_values_from_fit`] after fitting the cross-fit.
pub fn influence_values<T: Scalar>(
    data: &ObservationSet<T>,
    alpha: T,
    k: usize,
    config: &NuisanceConfig<T>,
    direction: EffectDirection,
    seed: u64,
) -> Result<Vec<T>> {
    check_alpha(alpha)?;
    let cf = CrossFit::fit(data, k, config, seed)?;
    influence_values_from_fit(&cf, data, alpha, direction, None)
}

/// Estimates over an increasing grid of tail masses, with nuisances fitted once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaCurve<T> {
    pub method: Method,
    pub estimates: Vec<WteEstimate<T>>,
}

pub fn check_alpha_grid<T: Scalar>(alphas: &[T]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("empty alpha grid".into()));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("alpha grid must be strictly increasing".into()));
    }
    Ok(())
}

/// One curve per method, sharing a single cross-fit.
pub fn estimate_curves<T: Scalar>(
    crossfit: &CrossFit<T>,
    data: &ObservationSet<T>,
    alphas: &[T],
    methods: &[Method],
    direction: EffectDirection,
    pool: Option<&UnlabeledCovariates<T>>,
) -> Result<Vec<AlphaCurve<T>>> {
    check_alpha_grid(alphas)?;
    methods
        .iter()
        .map(|&method| {
            let estimates = alphas
                .iter()
                .map(|&a| crossfit.estimate(data, a, method, direction, pool))
                .collect::<Result<Vec<_>>>()?;
            Ok(AlphaCurve { method, estimates })
        })
        .collect()
}
