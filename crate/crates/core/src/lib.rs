//! Estimation of the worst-case subpopulation treatment effect: the average
//! treatment effect over the `alpha` fraction of the population whose
//! conditional effect is largest (or smallest).
//!
//! The main entry point is [`estimate_wte`], a cross-fitted augmented
//! estimator with a normal-theory variance. Direct-method and
//! inverse-propensity baselines, power calculations and a Monte Carlo
//! harness with closed-form ground truth are also provided.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod crossfit;
pub mod cvar;
pub mod data;
pub mod error;
pub mod estimators;
pub mod normal;
pub mod nuisance;
pub mod power;
pub mod rng;
pub mod scalar;
pub mod simulation;

pub use crossfit::{estimate_wte, fit_fold_nuisances, fold_estimate, kappa, CrossFit, FoldAssignment, FoldEstimate, FoldModels, NuisanceFit};
pub use cvar::{closed_form_normal_wte, cvar_dual_objective, empirical_cvar, empirical_quantile, CvarResult};
pub use data::{load_dataset, load_unlabeled, read_dataset, validate, write_dataset, EffectDirection, Matrix, ObservationSet, UnlabeledCovariates};
pub use error::{DataError, Error, Result};
pub use estimators::{
    confidence_interval, dm_estimate, estimate_curves, influence_values, influence_values_from_fit, ipw_estimate, AlphaCurve,
    ConfidenceInterval, Method, Sided, WteEstimate,
};
pub use nuisance::{fit_outcome_model, fit_propensity_model, HyperGrid, NuisanceConfig, OutcomeModel, PropensitySpec};
pub use power::{achieved_power, min_sample_size, PowerSpec, TestSides};
pub use scalar::Scalar;

pub type ObservationSetF64 = ObservationSet<f64>;
pub type ObservationSetF32 = ObservationSet<f32>;
pub type WteEstimateF64 = WteEstimate<f64>;
pub type WteEstimateF32 = WteEstimate<f32>;
pub type NuisanceConfigF64 = NuisanceConfig<f64>;
pub type NuisanceConfigF32 = NuisanceConfig<f32>;
pub type CrossFitF64 = CrossFit<f64>;
pub type CrossFitF32 = CrossFit<f32>;
