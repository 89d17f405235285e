//! Elastic-net penalized logistic regression fitted by proximal Newton steps
//! (IRLS outer loop, coordinate descent inner loop, backtracking on the true
//! objective).
//!
//! Objective on the design `x`:
//! `(1/n) sum [log(1 + exp(eta_i)) - z_i eta_i] + lambda (l1_ratio |beta|_1 + (1 - l1_ratio)/2 |beta|^2)`
//! with `eta_i = b0 + x_i . beta` and an unpenalized intercept `b0`.

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::nuisance::linear::Standardizer;
use crate::nuisance::PropensityModel;
use crate::scalar::{stable_sum, Scalar};

const INNER_SWEEPS: usize = 50;
const MAX_HALVINGS: usize = 40;

#[inline]
fn softplus<T: Scalar>(eta: T) -> T {
    if eta > T::zero() {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

/// Penalty settings shared by the loss, gradient and solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnetPenalty<T> {
    pub lambda: T,
    pub l1_ratio: T,
}

impl<T: Scalar> EnetPenalty<T> {
    fn value(&self, beta: &[T]) -> T {
        let l1 = stable_sum(beta.iter().map(|b| b.abs()));
        let l2 = stable_sum(beta.iter().map(|&b| b * b));
        self.lambda * (self.l1_ratio * l1 + (T::one() - self.l1_ratio) * T::of(0.5) * l2)
    }
}

fn linear_predictor<T: Scalar>(x: &Matrix<T>, intercept: T, beta: &[T]) -> Vec<T> {
    x.row_iter()
        .map(|r| intercept + r.iter().zip(beta).map(|(&a, &b)| a * b).sum::<T>())
        .collect()
}

/// Penalized mean log-loss at `(intercept, beta)`.
pub fn penalized_log_loss<T: Scalar>(
    x: &Matrix<T>,
    z: &[T],
    intercept: T,
    beta: &[T],
    penalty: EnetPenalty<T>,
) -> T {
    let eta = linear_predictor(x, intercept, beta);
    let n = T::of_usize(z.len());
    stable_sum(eta.iter().zip(z).map(|(&e, &zi)| softplus(e) - zi * e)) / n + penalty.value(beta)
}

/// Gradient of [`penalized_log_loss`] with respect to `(intercept, beta...)`.
/// The L1 term contributes `sign(beta_j)`, so this is the true gradient away from `beta_j = 0`.
pub fn penalized_log_loss_gradient<T: Scalar>(
    x: &Matrix<T>,
    z: &[T],
    intercept: T,
    beta: &[T],
    penalty: EnetPenalty<T>,
) -> Vec<T> {
    let eta = linear_predictor(x, intercept, beta);
    let n = T::of_usize(z.len());
    let resid: Vec<T> = eta.iter().zip(z).map(|(&e, &zi)| sigmoid(e) - zi).collect();
    let mut grad = Vec::with_capacity(beta.len() + 1);
    grad.push(stable_sum(resid.iter().copied()) / n);
    for (j, &b) in beta.iter().enumerate() {
        let g = stable_sum(x.row_iter().zip(&resid).map(|(r, &e)| r[j] * e)) / n;
        let l1 = if b == T::zero() { T::zero() } else { b.signum() };
        grad.push(g + penalty.lambda * ((T::one() - penalty.l1_ratio) * b + penalty.l1_ratio * l1));
    }
    grad
}

/// Solver output on the raw design.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticSolution<T> {
    pub intercept: T,
    pub beta: Vec<T>,
    pub iterations: usize,
    pub objective: T,
}

fn soft_threshold<T: Scalar>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

/// Minimizes the penalized log-loss starting from the zero vector.
pub fn fit_logistic_enet<T: Scalar>(
    x: &Matrix<T>,
    z: &[T],
    penalty: EnetPenalty<T>,
    max_iter: usize,
    tol: T,
) -> Result<LogisticSolution<T>> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 || z.len() != n {
        return Err(Error::EmptyInput);
    }
    let nf = T::of_usize(n);
    let cols: Vec<Vec<T>> = (0..p).map(|j| x.row_iter().map(|r| r[j]).collect()).collect();
    let l1 = penalty.lambda * penalty.l1_ratio;
    let l2 = penalty.lambda * (T::one() - penalty.l1_ratio);
    let w_floor = T::of(1e-5);

    let mut b0 = T::zero();
    let mut beta = vec![T::zero(); p];
    let mut obj = penalized_log_loss(x, z, b0, &beta, penalty);

    for iter in 1..=max_iter {
        let eta = linear_predictor(x, b0, &beta);
        let w: Vec<T> = eta
            .iter()
            .map(|&e| {
                let pr = sigmoid(e);
                (pr * (T::one() - pr)).max(w_floor)
            })
            .collect();
        // Working residual of the quadratic model around the current iterate.
        let mut res: Vec<T> = eta.iter().zip(z).zip(&w).map(|((&e, &zi), &wi)| (zi - sigmoid(e)) / wi).collect();
        let w_sum = stable_sum(w.iter().copied());
        let wsq: Vec<T> = cols
            .iter()
            .map(|c| stable_sum(c.iter().zip(&w).map(|(&a, &wi)| wi * a * a)) / nf)
            .collect();
        let mut nb0 = b0;
        let mut nbeta = beta.clone();
        for _ in 0..INNER_SWEEPS {
            let mut max_delta = T::zero();
            let shift = stable_sum(res.iter().zip(&w).map(|(&r, &wi)| r * wi)) / w_sum;
            nb0 += shift;
            res.iter_mut().for_each(|r| *r -= shift);
            max_delta = max_delta.max(shift.abs());
            for j in 0..p {
                let denom = wsq[j] + l2;
                if denom <= T::zero() {
                    continue;
                }
                let rho = stable_sum(cols[j].iter().zip(&res).zip(&w).map(|((&a, &r), &wi)| wi * a * r)) / nf
                    + wsq[j] * nbeta[j];
                let new = soft_threshold(rho, l1) / denom;
                let delta = new - nbeta[j];
                if delta != T::zero() {
                    res.iter_mut().zip(&cols[j]).for_each(|(r, &a)| *r -= delta * a);
                    nbeta[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta <= tol {
                break;
            }
        }

        // Backtrack along the proximal Newton direction until the objective does not increase.
        let d0 = nb0 - b0;
        let dbeta: Vec<T> = nbeta.iter().zip(&beta).map(|(&a, &b)| a - b).collect();
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cb0 = b0 + step * d0;
            let cbeta: Vec<T> = beta.iter().zip(&dbeta).map(|(&b, &d)| b + step * d).collect();
            let cobj = penalized_log_loss(x, z, cb0, &cbeta, penalty);
            if cobj <= obj {
                accepted = Some((cb0, cbeta, cobj));
                break;
            }
            step = step * T::of(0.5);
        }
        let Some((cb0, cbeta, cobj)) = accepted else {
            // No descent available along the Newton direction: stationary up to rounding.
            return Ok(LogisticSolution { intercept: b0, beta, iterations: iter, objective: obj });
        };
        let change = dbeta.iter().fold(d0.abs(), |m, d| m.max(d.abs())) * step;
        b0 = cb0;
        beta = cbeta;
        obj = cobj;
        if change <= tol {
            return Ok(LogisticSolution { intercept: b0, beta, iterations: iter, objective: obj });
        }
    }
    Err(Error::NonConvergence(max_iter))
}

/// Logistic propensity model fitted on standardized covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel<T> {
    scaler: Standardizer<T>,
    intercept: T,
    beta: Vec<T>,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn fit(x: &Matrix<T>, z: &[T], penalty: EnetPenalty<T>, max_iter: usize, tol: T) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let sol = fit_logistic_enet(&scaler.apply(x), z, penalty, max_iter, tol)?;
        Ok(Self {
            scaler,
            intercept: sol.intercept,
            beta: sol.beta,
        })
    }
}

impl<T: Scalar> PropensityModel<T> for LogisticModel<T> {
    fn raw_prob(&self, x: &[T]) -> T {
        let mut buf = Vec::with_capacity(x.len());
        self.scaler.apply_row(x, &mut buf);
        sigmoid(self.intercept + buf.iter().zip(&self.beta).map(|(&a, &b)| a * b).sum::<T>())
    }
}
