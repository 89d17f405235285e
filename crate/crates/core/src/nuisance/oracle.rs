//! Pass-through nuisances built from known functions, and smooth corruptions
//! of them with a controlled sup-norm error.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::nuisance::{OutcomeRegressor, PropensityModel};
use crate::rng::{open_unit, standard_normal, stream_rng};
use crate::scalar::Scalar;

/// A function of the covariate vector.
pub type CovariateFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

pub struct OracleRegressor<T>(pub CovariateFn<T>);

impl<T> fmt::Debug for OracleRegressor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("OracleRegressor")
    }
}

impl<T: Scalar> OutcomeRegressor<T> for OracleRegressor<T> {
    fn predict_row(&self, x: &[T]) -> T {
        (self.0)(x)
    }
}

pub struct OraclePropensity<T>(pub CovariateFn<T>);

impl<T: Scalar> PropensityModel<T> for OraclePropensity<T> {
    fn raw_prob(&self, x: &[T]) -> T {
        (self.0)(x)
    }
}

pub struct ConstantPropensity<T>(pub T);

impl<T: Scalar> PropensityModel<T> for ConstantPropensity<T> {
    fn raw_prob(&self, _x: &[T]) -> T {
        self.0
    }
}

/// `scale * cos(w . x + phase)`: a bounded ridge perturbation whose sup-norm over
/// covariate space is exactly `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosinePerturbation<T> {
    pub scale: T,
    pub frequencies: Vec<T>,
    pub phase: T,
}

impl<T: Scalar> CosinePerturbation<T> {
    /// Frequencies are i.i.d. `N(0, 1/dim)`, the phase uniform on `[0, 2 pi)`.
    pub fn random(scale: T, dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0x636f_7272);
        let sd = 1.0 / (dim.max(1) as f64).sqrt();
        let frequencies = (0..dim).map(|_| T::of(sd * standard_normal(&mut rng))).collect();
        let phase = T::of(2.0 * PI * open_unit(&mut rng));
        Self { scale, frequencies, phase }
    }

    pub fn eval(&self, x: &[T]) -> T {
        let arg = self.phase + x.iter().zip(&self.frequencies).map(|(&a, &w)| a * w).sum::<T>();
        self.scale * arg.cos()
    }
}

/// An oracle plus a perturbation of size `amplitude * n^(-rate_exponent)`.
#[derive(Clone)]
pub struct CorruptedOracle<T> {
    base: CovariateFn<T>,
    perturbation: CosinePerturbation<T>,
}

impl<T: Scalar> CorruptedOracle<T> {
    /// Sup-norm of the injected error.
    pub fn sup_norm(&self) -> T {
        self.perturbation.scale.abs()
    }

    pub fn perturbation(&self) -> &CosinePerturbation<T> {
        &self.perturbation
    }

    pub fn eval(&self, x: &[T]) -> T {
        (self.base)(x) + self.perturbation.eval(x)
    }

    pub fn into_fn(self) -> CovariateFn<T> {
        Arc::new(move |x: &[T]| self.eval(x))
    }
}

/// Wraps an oracle nuisance with an error of sup-norm `amplitude * n^(-rate_exponent)`.
/// Propensity oracles corrupted this way are re-clipped by [`super::ClippedPropensity`].
pub fn corrupt_oracle<T: Scalar>(
    oracle: CovariateFn<T>,
    rate_exponent: T,
    amplitude: T,
    n: usize,
    dim: usize,
    seed: u64,
) -> CorruptedOracle<T> {
    let scale = amplitude * T::of_usize(n).powf(-rate_exponent);
    CorruptedOracle {
        base: oracle,
        perturbation: CosinePerturbation::random(scale, dim, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> CovariateFn<f64> {
        Arc::new(|x: &[f64]| x[0] * 2.0 - x[1])
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let c = corrupt_oracle(base(), 0.25, 0.0, 1000, 2, 1);
        for x in [[0.3, -1.0], [2.0, 5.0]] {
            assert_eq!(c.eval(&x), base()(&x));
        }
    }

    #[test]
    fn sup_norm_follows_rate() {
        let c = corrupt_oracle(base(), 0.25, 1.0, 10_000, 2, 1);
        assert!((c.sup_norm() - 0.1).abs() < 1e-15);
        let c = corrupt_oracle(base(), 1.0 / 3.0, 1.0, 1000, 2, 1);
        assert!((c.sup_norm() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn injected_error_attains_but_never_exceeds_sup_norm() {
        let c = corrupt_oracle(base(), 0.25, 1.0, 10_000, 2, 7);
        let w = &c.perturbation().frequencies;
        let w_sq = w[0] * w[0] + w[1] * w[1];
        let mut max_err: f64 = 0.0;
        for i in 0..20_001 {
            // Walk along the frequency direction, where the cosine sweeps a full period.
            let t = (-4.0 + i as f64 * 4e-4) / w_sq;
            let x = [t * w[0], t * w[1]];
            let err = (c.eval(&x) - base()(&x)).abs();
            assert!(err <= 0.1 + 1e-15);
            max_err = max_err.max(err);
        }
        assert!(max_err > 0.1 - 1e-6);
    }

    #[test]
    fn perturbation_is_seeded() {
        let a = CosinePerturbation::<f64>::random(1.0, 3, 5);
        assert_eq!(a, CosinePerturbation::random(1.0, 3, 5));
        assert_ne!(a, CosinePerturbation::random(1.0, 3, 6));
    }
}
