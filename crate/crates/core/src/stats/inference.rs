use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng;

/// Mean computed relative to the first value, so equal values give an
/// exactly equal mean.
pub fn pivot_mean(values: &[f64]) -> f64 {
    let p = values[0];
    p + values.iter().map(|v| v - p).sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Percentile interval over `iters` resamples of an arbitrary statistic of
/// resampled case indices. Resamples where the statistic is undefined are
/// skipped; `None` if none are defined.
pub fn bootstrap_stat(
    n: usize,
    iters: usize,
    level: f64,
    seed: u64,
    mut stat: impl FnMut(&[usize]) -> Option<f64>,
) -> Option<(f64, f64)> {
    let mut r = rng::stream(seed, &[0xB007]);
    let mut idx = vec![0usize; n];
    let mut stats = Vec::with_capacity(iters);
    for _ in 0..iters {
        for i in idx.iter_mut() {
            *i = r.random_range(0..n);
        }
        if let Some(v) = stat(&idx) {
            stats.push(v);
        }
    }
    if stats.is_empty() {
        return None;
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let a = (1.0 - level) / 2.0;
    Some((quantile_sorted(&stats, a), quantile_sorted(&stats, 1.0 - a)))
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("confidence level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_ci(values: &[f64], iters: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!("bootstrap needs at least 2 values, got {}", values.len())));
    }
    if iters < 1000 {
        return Err(Error::InvalidInput(format!("bootstrap needs at least 1000 iterations, got {iters}")));
    }
    check_level(level)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bootstrap input"));
    }
    let mut buf = vec![0.0; values.len()];
    let ci = bootstrap_stat(values.len(), iters, level, seed, |idx| {
        for (b, &i) in buf.iter_mut().zip(idx) {
            *b = values[i];
        }
        Some(pivot_mean(&buf))
    });
    Ok(ci.expect("mean is always defined"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// Mean greater than zero.
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TTest {
    Test { t: f64, df: f64, p: f64, mean: f64, sd: f64 },
    /// Zero variance: no finite statistic.
    Degenerate { mean: f64 },
}

impl TTest {
    pub fn p(&self) -> Option<f64> {
        match self {
            TTest::Test { p, .. } => Some(*p),
            TTest::Degenerate { .. } => None,
        }
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = pivot_mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (m, (ss / (values.len() - 1) as f64).sqrt())
}

/// One-sample t-test of the mean of paired differences against zero.
pub fn paired_t(values: &[f64], alt: Alternative) -> Result<TTest> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!("t-test needs at least 2 values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test input"));
    }
    let (mean, sd) = mean_sd(values);
    if sd == 0.0 {
        return Ok(TTest::Degenerate { mean });
    }
    let n = values.len() as f64;
    let df = n - 1.0;
    let t = mean / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let lower = dist.cdf(t);
    let upper = dist.sf(t);
    let p = match alt {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
    };
    Ok(TTest::Test { t, df, p, mean, sd })
}

/// `mean -+ t_{(1+level)/2, n-1} sd / sqrt(n)`; a zero-width interval at the
/// mean when the variance is zero.
pub fn t_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!("t interval needs at least 2 values, got {}", values.len())));
    }
    check_level(level)?;
    let (mean, sd) = mean_sd(values);
    if sd == 0.0 {
        return Ok((mean, mean));
    }
    let n = values.len() as f64;
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let half = dist.inverse_cdf((1.0 + level) / 2.0) * sd / n.sqrt();
    Ok((mean - half, mean + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NiConfig {
    /// Largest tolerated deficit; negative.
    pub margin: f64,
    pub level: f64,
    pub bootstrap_iters: usize,
    pub seed: u64,
}

impl Default for NiConfig {
    fn default() -> Self {
        NiConfig {
            margin: -0.10,
            level: 0.95,
            bootstrap_iters: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NiVerdict {
    Noninferior,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiResult {
    pub mean: f64,
    pub bootstrap_ci: (f64, f64),
    pub verdict: NiVerdict,
    /// Sensitivity analysis on the t-based interval.
    pub t_ci: (f64, f64),
    pub t_verdict: NiVerdict,
}

fn verdict(lower: f64, margin: f64) -> NiVerdict {
    if lower > margin {
        NiVerdict::Noninferior
    } else {
        NiVerdict::Inconclusive
    }
}

/// Non-inferiority from the bootstrap interval's lower bound, with the
/// t-interval decision alongside.
pub fn ni_decision(values: &[f64], cfg: &NiConfig) -> Result<NiResult> {
    if !(cfg.margin < 0.0) {
        return Err(Error::InvalidInput(format!("non-inferiority margin {} must be negative", cfg.margin)));
    }
    let ci = bootstrap_ci(values, cfg.bootstrap_iters, cfg.level, cfg.seed)?;
    let t_ci = t_interval(values, cfg.level)?;
    Ok(NiResult {
        mean: pivot_mean(values),
        bootstrap_ci: ci,
        verdict: verdict(ci.0, cfg.margin),
        t_ci,
        t_verdict: verdict(t_ci.0, cfg.margin),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_zero_width() {
        let v = vec![0.1; 26];
        assert_eq!(bootstrap_ci(&v, 1000, 0.95, 3).unwrap(), (0.1, 0.1));
        assert!(bootstrap_ci(&[1.0], 1000, 0.95, 3).is_err());
        assert!(bootstrap_ci(&v, 10, 0.95, 3).is_err());
    }

    #[test]
    fn t_closed_form_n2() {
        let TTest::Test { t, df, p, .. } = paired_t(&[1.0, 3.0], Alternative::TwoSided).unwrap() else {
            panic!()
        };
        // mean 2, sd sqrt(2), se 1
        assert!((t - 2.0).abs() < 1e-15);
        assert_eq!(df, 1.0);
        // Cauchy: P(|T| > 2) = 1 - 2 atan(2) / pi
        assert!((p - (1.0 - 2.0 * 2f64.atan() / std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn t_symmetric_and_degenerate() {
        let TTest::Test { t, p, .. } = paired_t(&[-0.5, 0.5], Alternative::TwoSided).unwrap() else {
            panic!()
        };
        assert_eq!(t, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(paired_t(&[0.0; 5], Alternative::Greater).unwrap(), TTest::Degenerate { mean: 0.0 });
    }

    #[test]
    fn ni_cases() {
        let cfg = NiConfig::default();
        let r = ni_decision(&[0.0; 26], &cfg).unwrap();
        assert_eq!(r.bootstrap_ci, (0.0, 0.0));
        assert_eq!(r.verdict, NiVerdict::Noninferior);
        let r = ni_decision(&[-0.2; 26], &cfg).unwrap();
        assert_eq!(r.verdict, NiVerdict::Inconclusive);
        assert!(ni_decision(&[0.0; 4], &NiConfig { margin: 0.1, ..cfg }).is_err());
    }
}
