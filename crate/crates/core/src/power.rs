//! Sample size and power for testing the worst-case effect against a
//! minimum detectable shift, from the efficient asymptotic variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{normal_cdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TestSides {
    #[default]
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSpec {
    pub sigma2: f64,
    pub epsilon: f64,
    pub size: f64,
    pub power: f64,
    pub sided: TestSides,
}

impl PowerSpec {
    /// Size 0.05, power 0.8, one-sided.
    pub fn new(sigma2: f64, epsilon: f64) -> Self {
        Self { sigma2, epsilon, size: 0.05, power: 0.8, sided: TestSides::OneSided }
    }

    fn check(&self, need_power: bool) -> Result<()> {
        let unit = |p: f64| p > 0.0 && p < 1.0;
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidSpec(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !unit(self.size) {
            return Err(Error::InvalidSpec(format!("size must lie in (0,1), got {}", self.size)));
        }
        if need_power && !unit(self.power) {
            return Err(Error::InvalidSpec(format!("power must lie in (0,1), got {}", self.power)));
        }
        Ok(())
    }

    /// Critical value `z_{1-size}` (one-sided) or `z_{1-size/2}` (two-sided).
    pub fn critical_value(&self) -> f64 {
        match self.sided {
            TestSides::OneSided => normal_quantile(1.0 - self.size),
            TestSides::TwoSided => normal_quantile(1.0 - self.size / 2.0),
        }
    }

    /// `(z_crit + z_power)^2`, the factor multiplying `sigma2 / epsilon^2`.
    pub fn multiplier(&self) -> Result<f64> {
        self.check(true)?;
        Ok((self.critical_value() + normal_quantile(self.power)).powi(2))
    }
}

/// Smallest `n` (at least 2) reaching the requested power.
pub fn min_sample_size(spec: &PowerSpec) -> Result<u64> {
    let raw = spec.multiplier()? * spec.sigma2 / (spec.epsilon * spec.epsilon);
    if !raw.is_finite() || raw > 1e18 {
        return Err(Error::InvalidSpec("required sample size overflows".into()));
    }
    // Rounding in the quantiles can put the ceiling one step off at exact boundaries.
    let mut n = raw.ceil().max(2.0) as u64;
    while achieved_power(n, spec)? < spec.power {
        n += 1;
    }
    while n > 2 && achieved_power(n - 1, spec)? >= spec.power {
        n -= 1;
    }
    Ok(n)
}

/// `Phi(epsilon sqrt(n) / sigma - z_crit)`. The `power` field is ignored.
pub fn achieved_power(n: u64, spec: &PowerSpec) -> Result<f64> {
    spec.check(false)?;
    if n < 2 {
        return Err(Error::InvalidSpec(format!("n must be at least 2, got {n}")));
    }
    Ok(normal_cdf(spec.epsilon * (n as f64).sqrt() / spec.sigma2.sqrt() - spec.critical_value()))
}
