//! Penalized least-squares regressors: ridge (closed form), elastic net
//! (coordinate descent) and a tensor-product polynomial sieve on top of ridge.

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::nuisance::OutcomeRegressor;
use crate::scalar::{stable_mean, stable_sum, Scalar};

/// Solves `A x = b` for symmetric positive definite `A` (row-major `p x p`).
///
/// Pivots below `p * eps * max_diag` are treated as singular.
pub(crate) fn cholesky_solve<T: Scalar>(a: &[T], b: &[T], p: usize) -> Result<Vec<T>> {
    let max_diag = (0..p).map(|i| a[i * p + i].abs()).fold(T::zero(), T::max);
    let floor = T::of_usize(p.max(1)) * T::epsilon() * max_diag.max(T::min_positive_value());
    let mut l = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > floor) {
                    return Err(Error::SingularDesign);
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut y = vec![T::zero(); p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * y[k];
        }
        y[i] = s / l[i * p + i];
    }
    let mut x = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in i + 1..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Ok(x)
}

fn column_means<T: Scalar>(x: &Matrix<T>) -> Vec<T> {
    (0..x.cols())
        .map(|j| stable_mean(&x.row_iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect()
}

/// Fitted affine predictor `intercept + x . coefs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    pub intercept: T,
    pub coefs: Vec<T>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        self.intercept + x.iter().zip(&self.coefs).map(|(&a, &b)| a * b).sum::<T>()
    }
}

/// Minimizes `sum (y - b0 - x beta)^2 + penalty * |beta|^2` with an unpenalized intercept.
pub fn fit_ridge<T: Scalar>(x: &Matrix<T>, y: &[T], penalty: T) -> Result<LinearModel<T>> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 || y.len() != n {
        return Err(Error::EmptyInput);
    }
    let x_mean = column_means(x);
    let y_mean = stable_mean(y);
    let mut gram = vec![T::zero(); p * p];
    let mut rhs = vec![T::zero(); p];
    for (row, &yi) in x.row_iter().zip(y) {
        let yc = yi - y_mean;
        for j in 0..p {
            let xj = row[j] - x_mean[j];
            rhs[j] += xj * yc;
            for k in 0..=j {
                gram[j * p + k] += xj * (row[k] - x_mean[k]);
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[k * p + j] = gram[j * p + k];
        }
        gram[j * p + j] += penalty;
    }
    let coefs = if p == 0 { Vec::new() } else { cholesky_solve(&gram, &rhs, p)? };
    let intercept = y_mean - x_mean.iter().zip(&coefs).map(|(&m, &b)| m * b).sum::<T>();
    Ok(LinearModel { intercept, coefs })
}

impl<T: Scalar> OutcomeRegressor<T> for LinearModel<T> {
    fn predict_row(&self, x: &[T]) -> T {
        LinearModel::predict_row(self, x)
    }
}

/// Per-column centering and scaling learned on the training rows.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Standardizer<T> {
    pub means: Vec<T>,
    pub scales: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(x: &Matrix<T>) -> Self {
        let means = column_means(x);
        let n = T::of_usize(x.rows().max(1));
        let scales = (0..x.cols())
            .map(|j| {
                let ss = stable_sum(x.row_iter().map(|r| (r[j] - means[j]) * (r[j] - means[j])));
                let sd = (ss / n).sqrt();
                if sd > T::zero() {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Self { means, scales }
    }

    pub fn apply_row(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(x.iter().enumerate().map(|(j, &v)| (v - self.means[j]) / self.scales[j]));
    }

    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut data = Vec::with_capacity(x.rows() * x.cols());
        let mut buf = Vec::with_capacity(x.cols());
        for row in x.row_iter() {
            self.apply_row(row, &mut buf);
            data.extend_from_slice(&buf);
        }
        Matrix::new(x.rows(), x.cols(), data).expect("shape preserved")
    }
}

/// Elastic-net least squares on standardized covariates.
///
/// Objective: `(1/2n) sum (y - b0 - x beta)^2 + lambda (l1_ratio |beta|_1 + (1 - l1_ratio)/2 |beta|^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetModel<T> {
    scaler: Standardizer<T>,
    model: LinearModel<T>,
}

/// Result of a raw coordinate-descent run.
#[derive(Debug, Clone)]
pub struct EnetPath<T> {
    pub model: LinearModel<T>,
    /// Objective value after each full sweep.
    pub losses: Vec<T>,
    /// Largest KKT violation at the returned solution.
    pub kkt_violation: T,
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

pub(crate) fn enet_objective<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    model: &LinearModel<T>,
    lambda: T,
    l1_ratio: T,
) -> T {
    let n = T::of_usize(y.len());
    let rss = stable_sum(x.row_iter().zip(y).map(|(r, &yi)| {
        let e = yi - model.predict_row(r);
        e * e
    }));
    let l1 = stable_sum(model.coefs.iter().map(|b| b.abs()));
    let l2 = stable_sum(model.coefs.iter().map(|&b| b * b));
    rss / (n + n) + lambda * (l1_ratio * l1 + (T::one() - l1_ratio) * T::of(0.5) * l2)
}

/// Cyclic coordinate descent on the given design (no rescaling).
pub fn elastic_net_descent<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    l1_ratio: T,
    max_iter: usize,
    tol: T,
) -> Result<EnetPath<T>> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let nf = T::of_usize(n);
    let cols: Vec<Vec<T>> = (0..p).map(|j| x.row_iter().map(|r| r[j]).collect()).collect();
    let sq: Vec<T> = cols.iter().map(|c| stable_sum(c.iter().map(|&v| v * v)) / nf).collect();
    let mut beta = vec![T::zero(); p];
    let mut b0 = stable_mean(y);
    let mut resid: Vec<T> = y.iter().map(|&v| v - b0).collect();
    let l1 = lambda * l1_ratio;
    let l2 = lambda * (T::one() - l1_ratio);
    let mut losses = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut max_delta = T::zero();
        // Intercept update is exact given the other coordinates.
        let shift = stable_mean(&resid);
        b0 += shift;
        resid.iter_mut().for_each(|r| *r -= shift);
        for j in 0..p {
            let denom = sq[j] + l2;
            if denom <= T::zero() {
                continue;
            }
            let rho = stable_sum(cols[j].iter().zip(&resid).map(|(&a, &r)| a * r)) / nf + sq[j] * beta[j];
            let new = soft_threshold(rho, l1) / denom;
            let delta = new - beta[j];
            if delta != T::zero() {
                resid.iter_mut().zip(&cols[j]).for_each(|(r, &a)| *r -= delta * a);
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let model = LinearModel { intercept: b0, coefs: beta.clone() };
        losses.push(enet_objective(x, y, &model, lambda, l1_ratio));
        if max_delta <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(max_iter));
    }
    let mut kkt = stable_mean(&resid).abs();
    for j in 0..p {
        let grad = -stable_sum(cols[j].iter().zip(&resid).map(|(&a, &r)| a * r)) / nf + l2 * beta[j];
        let violation = if beta[j] != T::zero() {
            (grad + l1 * beta[j].signum()).abs()
        } else {
            (grad.abs() - l1).max(T::zero())
        };
        kkt = kkt.max(violation);
    }
    Ok(EnetPath {
        model: LinearModel { intercept: b0, coefs: beta },
        losses,
        kkt_violation: kkt,
    })
}

impl<T: Scalar> ElasticNetModel<T> {
    pub fn fit(x: &Matrix<T>, y: &[T], lambda: T, l1_ratio: T, max_iter: usize, tol: T) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let path = elastic_net_descent(&scaler.apply(x), y, lambda, l1_ratio, max_iter, tol)?;
        Ok(Self { scaler, model: path.model })
    }
}

impl<T: Scalar> OutcomeRegressor<T> for ElasticNetModel<T> {
    fn predict_row(&self, x: &[T]) -> T {
        let mut buf = Vec::with_capacity(x.len());
        self.scaler.apply_row(x, &mut buf);
        self.model.predict_row(&buf)
    }
}

/// Exponent vectors of the tensor-product basis with per-dimension degree `degree`,
/// excluding the constant term.
pub(crate) fn tensor_exponents(d: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; d];
    loop {
        if cur.iter().any(|&e| e > 0) {
            out.push(cur.clone());
        }
        let mut j = 0;
        loop {
            if j == d {
                return out;
            }
            cur[j] += 1;
            if cur[j] <= degree {
                break;
            }
            cur[j] = 0;
            j += 1;
        }
    }
}

/// Largest per-dimension degree `<= requested` whose basis has fewer than `n / 10` terms.
/// Returns 0 when even the linear tensor basis is too large; the sieve then
/// falls back to the plain linear features.
pub(crate) fn capped_degree(d: usize, n: usize, requested: usize) -> usize {
    let budget = n as f64 / 10.0;
    (1..=requested)
        .rev()
        .find(|&p| ((p + 1) as f64).powi(d as i32) - 1.0 < budget)
        .unwrap_or(0)
}

/// Polynomial sieve: standardized covariates expanded into tensor-product
/// monomials, then ridge.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSieveModel<T> {
    scaler: Standardizer<T>,
    exponents: Vec<Vec<usize>>,
    ridge: LinearModel<T>,
}

impl<T: Scalar> PolynomialSieveModel<T> {
    /// Basis for `d` covariates at `degree`, or the linear basis when `degree == 0`.
    pub(crate) fn basis(d: usize, degree: usize) -> Vec<Vec<usize>> {
        if degree == 0 {
            (0..d)
                .map(|j| {
                    let mut e = vec![0; d];
                    e[j] = 1;
                    e
                })
                .collect()
        } else {
            tensor_exponents(d, degree)
        }
    }

    fn expand_row(exponents: &[Vec<usize>], z: &[T]) -> Vec<T> {
        exponents
            .iter()
            .map(|e| e.iter().zip(z).fold(T::one(), |acc, (&k, &v)| acc * v.powi(k as i32)))
            .collect()
    }

    pub(crate) fn expand(scaler: &Standardizer<T>, exponents: &[Vec<usize>], x: &Matrix<T>) -> Matrix<T> {
        let mut data = Vec::with_capacity(x.rows() * exponents.len());
        let mut z = Vec::with_capacity(x.cols());
        for row in x.row_iter() {
            scaler.apply_row(row, &mut z);
            data.extend(Self::expand_row(exponents, &z));
        }
        Matrix::new(x.rows(), exponents.len(), data).expect("feature shape")
    }

    pub fn fit(x: &Matrix<T>, y: &[T], degree: usize, penalty: T) -> Result<Self> {
        let degree = capped_degree(x.cols(), x.rows(), degree);
        let exponents = Self::basis(x.cols(), degree);
        let scaler = Standardizer::fit(x);
        let features = Self::expand(&scaler, &exponents, x);
        let ridge = fit_ridge(&features, y, penalty)?;
        Ok(Self { scaler, exponents, ridge })
    }

    pub fn n_features(&self) -> usize {
        self.exponents.len()
    }
}

impl<T: Scalar> OutcomeRegressor<T> for PolynomialSieveModel<T> {
    fn predict_row(&self, x: &[T]) -> T {
        let mut z = Vec::with_capacity(x.len());
        self.scaler.apply_row(x, &mut z);
        self.ridge.predict_row(&Self::expand_row(&self.exponents, &z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix<f64> {
        Matrix::column_vector(v.to_vec())
    }

    #[test]
    fn ridge_hand_solution_on_centered_data() {
        // slope = sum(xy) / (sum(x^2) + lambda) = 4 / 3
        let m = fit_ridge(&col(&[-1.0, 0.0, 1.0]), &[-2.0, 0.0, 2.0], 1.0).unwrap();
        assert!((m.coefs[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!(m.intercept.abs() < 1e-14);
    }

    #[test]
    fn ridge_interpolates_realizable_linear_target() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        for penalty in [0.0, 1e-12] {
            let m = fit_ridge(&col(&xs), &ys, penalty).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                assert!((m.predict_row(&[*x]) - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ridge_without_penalty_rejects_rank_deficient_design() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(fit_ridge(&x, &[1.0, 2.0, 3.0], 0.0).unwrap_err(), Error::SingularDesign);
        assert!(fit_ridge(&x, &[1.0, 2.0, 3.0], 0.1).is_ok());
    }

    #[test]
    fn enet_descent_loss_is_monotone_and_kkt_small() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.7).sin(), (t * 1.3).cos(), (t * 0.1) - 2.0]
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 * r[0] - 0.5 * r[2] + 0.1 * r[1] * r[1]).collect();
        let path = elastic_net_descent(&x, &y, 0.05, 0.5, 10_000, 1e-12).unwrap();
        for w in path.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
        assert!(path.kkt_violation < 1e-8, "{}", path.kkt_violation);
    }

    #[test]
    fn enet_with_huge_penalty_is_intercept_only() {
        let x = col(&[1.0, 2.0, 3.0, 4.0]);
        let m = ElasticNetModel::fit(&x, &[1.0, 3.0, 2.0, 6.0], 1e6, 0.5, 1000, 1e-12).unwrap();
        assert!((m.predict_row(&[10.0]) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn tensor_basis_size() {
        assert_eq!(tensor_exponents(2, 3).len(), 15);
        assert_eq!(tensor_exponents(1, 3), vec![vec![1], vec![2], vec![3]]);
        assert_eq!(capped_degree(2, 1000, 3), 3);
        assert_eq!(capped_degree(2, 100, 3), 2); // 9 - 1 = 8 < 10
        assert_eq!(capped_degree(10, 100, 3), 0);
    }

    #[test]
    fn sieve_recovers_cubic() {
        let xs: Vec<f64> = (0..200).map(|i| -2.0 + 4.0 * i as f64 / 199.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x - x + 0.5).collect();
        let m = PolynomialSieveModel::fit(&col(&xs), &ys, 3, 1e-10).unwrap();
        assert_eq!(m.n_features(), 3);
        for x in [-1.5, 0.0, 0.7] {
            assert!((m.predict_row(&[x]) - (x * x * x - x + 0.5)).abs() < 1e-6);
        }
    }
}
