//! Empirical conditional value-at-risk through its dual (threshold) form.
//!
//! For values `v_1..v_m` and tail mass `alpha` the dual objective is
//! `eta + mean[(v - eta)_+] / alpha`. It is convex and piecewise linear in
//! `eta`, and its infimum is attained at the empirical `(1 - alpha)`-quantile
//! under the left-continuous convention `inf { t : F(t) >= p }`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal::{normal_pdf, normal_quantile};
use crate::scalar::{stable_mean, stable_sum, Scalar};

/// Optimum of the CVaR dual problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvarResult<T> {
    /// Infimum of the dual objective.
    pub value: T,
    /// A minimizing threshold.
    pub eta_star: T,
    pub alpha: T,
}

pub(crate) fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::AlphaOutOfRange(alpha.as_f64()));
    }
    Ok(())
}

/// 1-indexed rank of the order statistic equal to `inf { t : F(t) >= p }`
/// for `m` points. The count `k/m` is compared directly against `p` so
/// that products such as `0.7 * 10` rounding up do not shift the rank.
pub(crate) fn quantile_rank(m: usize, p: f64) -> usize {
    let mf = m as f64;
    let mut k = ((p * mf).ceil() as usize).clamp(1, m);
    while k > 1 && (k - 1) as f64 / mf >= p {
        k -= 1;
    }
    while k < m && (k as f64) / mf < p {
        k += 1;
    }
    k
}

fn sorted_copy<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    sorted
}

/// Empirical `p`-quantile `inf { t : F(t) >= p }`: the `ceil(p m)`-th order statistic.
pub fn empirical_quantile<T: Scalar>(values: &[T], p: T) -> Result<T> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(p > T::zero() && p <= T::one()) {
        return Err(Error::InvalidConfig(format!("quantile level {p} outside (0,1]")));
    }
    let sorted = sorted_copy(values);
    Ok(sorted[quantile_rank(sorted.len(), p.as_f64()) - 1])
}

/// `eta + mean[(v - eta)_+] / alpha`.
pub fn cvar_dual_objective<T: Scalar>(values: &[T], alpha: T, eta: T) -> Result<T> {
    check_alpha(alpha)?;
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let excess = stable_sum(values.iter().map(|&v| (v - eta).max(T::zero())));
    Ok(eta + excess / (alpha * T::of_usize(values.len())))
}

/// Exact minimum of [`cvar_dual_objective`] over `eta`.
pub fn empirical_cvar<T: Scalar>(values: &[T], alpha: T) -> Result<CvarResult<T>> {
    check_alpha(alpha)?;
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if alpha == T::one() {
        let min = values.iter().copied().fold(T::infinity(), T::min);
        return Ok(CvarResult {
            value: stable_mean(values),
            eta_star: min,
            alpha,
        });
    }
    let sorted = sorted_copy(values);
    let m = sorted.len();
    let eta = sorted[quantile_rank(m, (T::one() - alpha).as_f64()) - 1];
    let excess = stable_sum(sorted.iter().rev().take_while(|&&v| v > eta).map(|&v| v - eta));
    Ok(CvarResult {
        value: eta + excess / (alpha * T::of_usize(m)),
        eta_star: eta,
        alpha,
    })
}

/// Upper-tail CVaR of `N(mean, sd^2)`: `mean + sd * phi(Phi^{-1}(1 - alpha)) / alpha`.
pub fn closed_form_normal_wte<T: Scalar>(mean: T, sd: T, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    if !(sd >= T::zero()) {
        return Err(Error::InvalidConfig(format!("standard deviation {sd} is negative")));
    }
    if alpha == T::one() {
        return Ok(mean);
    }
    let a = alpha.as_f64();
    let z = normal_quantile(1.0 - a);
    Ok(mean + sd * T::of(normal_pdf(z) / a))
}
