use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Linear variance schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleConfig {
    /// T = 1000 with beta rising linearly from 1e-4 to 2e-2.
    fn default() -> Self {
        ScheduleConfig {
            steps: 1000,
            beta_min: 1e-4,
            beta_max: 2e-2,
        }
    }
}

/// Per-step tables for a linear schedule, indexed by `t` in `1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule<T> {
    betas: Vec<T>,
    alphas: Vec<T>,
    /// `alpha_bars[t]` for `t` in `0..=T`, with `alpha_bars[0] = 1`.
    alpha_bars: Vec<T>,
    posterior_variances: Vec<T>,
}

impl<T: Real> DiffusionSchedule<T> {
    pub fn linear(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 steps, got {steps}")));
        }
        if !(0.0 < beta_min && beta_min < beta_max && beta_max < 1.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 < beta_min < beta_max < 1, got {beta_min}, {beta_max}"
            )));
        }
        let mut betas = Vec::with_capacity(steps);
        let mut alphas = Vec::with_capacity(steps);
        let mut alpha_bars = Vec::with_capacity(steps + 1);
        let mut posterior_variances = Vec::with_capacity(steps);
        alpha_bars.push(T::one());
        let (lo, hi) = (T::lit(beta_min), T::lit(beta_max));
        let denom = T::from_usize_lossy(steps - 1);
        for t in 1..=steps {
            let beta = lo + (hi - lo) * T::from_usize_lossy(t - 1) / denom;
            let alpha = T::one() - beta;
            let prev = alpha_bars[t - 1];
            let ab = prev * alpha;
            betas.push(beta);
            alphas.push(alpha);
            alpha_bars.push(ab);
            posterior_variances.push((T::one() - prev) / (T::one() - ab) * beta);
        }
        Ok(DiffusionSchedule {
            betas,
            alphas,
            alpha_bars,
            posterior_variances,
        })
    }

    pub fn from_config(c: &ScheduleConfig) -> Result<Self> {
        Self::linear(c.steps, c.beta_min, c.beta_max)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::InvalidInput(format!(
                "timestep {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> T {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> T {
        self.alphas[t - 1]
    }

    /// Cumulative product of alphas up to `t`; `alpha_bar(0) = 1`.
    pub fn alpha_bar(&self, t: usize) -> T {
        self.alpha_bars[t]
    }

    /// Variance of the forward posterior, fixed as the reverse-step variance.
    /// Zero at `t = 1`.
    pub fn posterior_variance(&self, t: usize) -> T {
        self.posterior_variances[t - 1]
    }
}
