#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use wte_core::rng::standard_normal;
use wte_core::{CrossFit, Matrix, ObservationSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Confounded data: logistic propensity in `x_1`, heterogeneous effect in `x_2`.
pub fn random_dataset(seed: u64, n: usize, d: usize) -> ObservationSet<f64> {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..d).map(|_| standard_normal(&mut r)).collect();
        let e = 1.0 / (1.0 + (-0.8 * row[0]).exp());
        // Force both arms into every stretch of the sample.
        let zi = if i % 10 == 0 { 1 } else if i % 10 == 1 { 0 } else { u8::from(r.random::<f64>() < e) };
        let effect = 1.0 + if d > 1 { row[1] } else { 0.5 * row[0] };
        let base: f64 = row.iter().enumerate().map(|(j, v)| v / (j as f64 + 1.0)).sum();
        y.push(base + f64::from(zi) * effect + 0.7 * standard_normal(&mut r));
        z.push(zi);
        x.extend(row);
    }
    ObservationSet::new(Matrix::new(n, d, x).unwrap(), y, z, None).unwrap()
}

/// Cross-fitted AIPW average treatment effect from the fitted fold models,
/// coded directly from the textbook formula.
pub fn independent_aipw(cf: &CrossFit<f64>, data: &ObservationSet<f64>) -> f64 {
    let folds = cf.folds();
    let mut total = 0.0;
    for k in 0..folds.k() {
        let models = &cf.models()[k];
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..data.len() {
            if folds.fold_of()[i] != k {
                continue;
            }
            let x = data.covariates().row(i);
            let (m0, m1): (f64, f64) = (models.mu0.predict_row(x), models.mu1.predict_row(x));
            let e = models.e.predict_prob_row(x);
            let y = data.outcomes()[i];
            let zf = f64::from(data.treatments()[i]);
            sum += m1 - m0 + zf * (y - m1) / e - (1.0 - zf) * (y - m0) / (1.0 - e);
            count += 1;
        }
        total += sum / count as f64;
    }
    total / folds.k() as f64
}

/// Minimum of the dual objective over every data point and every midpoint,
/// evaluated from scratch.
pub fn brute_force_cvar(values: &[f64], alpha: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let mut grid = s.clone();
    grid.extend(s.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let m = values.len() as f64;
    grid.iter()
        .map(|&eta| eta + values.iter().map(|v| (v - eta).max(0.0)).sum::<f64>() / (alpha * m))
        .fold(f64::INFINITY, f64::min)
}
