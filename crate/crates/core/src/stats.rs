//! Goodness-of-fit tests and Monte Carlo summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// Smallest sample accepted by the tests.
pub const MIN_SAMPLES: usize = 100;

/// Cells with smaller expected count are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("{got} samples, at least {min} required")]
    TooFewSamples { got: usize, min: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub replicates: u64,
}

impl EstimateWithError {
    /// Sample mean and standard error of the mean.
    pub fn from_samples(xs: &[f64]) -> Result<Self, StatsError> {
        let n = xs.len();
        if n < 2 {
            return Err(StatsError::TooFewSamples { got: n, min: 2 });
        }
        let (mean, var) = mean_var(xs);
        Ok(Self { value: mean, std_error: (var / n as f64).sqrt(), replicates: n as u64 })
    }

    /// `|value - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Mean and unbiased variance, by Welford's recurrence.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let var = if xs.len() > 1 { m2 / (xs.len() - 1) as f64 } else { 0.0 };
    (mean, var)
}

/// Ratio `mean(x) / mean(y)` of paired samples with its delta-method
/// standard error.
pub fn ratio_estimate(x: &[f64], y: &[f64]) -> Result<EstimateWithError, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::Degenerate(format!("{} numerators for {} denominators", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { got: n, min: 2 });
    }
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    if my == 0.0 {
        return Err(StatsError::Degenerate("denominator mean is zero".into()));
    }
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1) as f64;
    let r = mx / my;
    let var = ((vx - 2.0 * r * cov + r * r * vy) / (my * my * n as f64)).max(0.0);
    Ok(EstimateWithError { value: r, std_error: var.sqrt(), replicates: n as u64 })
}

/// Kolmogorov-Smirnov test outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size `n` (one-sample) or `nm/(n+m)` (two-sample).
    pub effective_n: f64,
}

impl KsResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    // the series is within 1e-12 of 1 below this point
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS statistic `sup |F_n - F|` against a continuous cdf.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult, StatsError> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples { got: n, min: MIN_SAMPLES });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(StatsError::Degenerate("NaN sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, nf), effective_n: nf })
}

/// Two-sample KS statistic `sup |F_n - G_m|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    for s in [a, b] {
        if s.len() < MIN_SAMPLES {
            return Err(StatsError::TooFewSamples { got: s.len(), min: MIN_SAMPLES });
        }
        if s.iter().any(|x| x.is_nan()) {
            return Err(StatsError::Degenerate("NaN sample".into()));
        }
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, ne), effective_n: ne })
}

/// Chi-square goodness-of-fit outcome after pooling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Original cell indices in each pooled cell.
    pub cells: Vec<Vec<usize>>,
}

impl Chi2Result {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Pearson chi-square of `observed` counts against cell probabilities.
/// Consecutive cells are pooled until each expected count is at least
/// [`MIN_EXPECTED`]; a short remainder joins the last pooled cell.
pub fn chi2_test(observed: &[u64], expected_probs: &[f64]) -> Result<Chi2Result, StatsError> {
    if observed.len() != expected_probs.len() {
        return Err(StatsError::Degenerate(format!(
            "{} observed cells for {} probabilities",
            observed.len(),
            expected_probs.len()
        )));
    }
    let total: u64 = observed.iter().sum();
    if (total as usize) < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples { got: total as usize, min: MIN_SAMPLES });
    }
    if expected_probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(StatsError::Degenerate("negative or non-finite probability".into()));
    }
    let mass: f64 = expected_probs.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(StatsError::Degenerate(format!("probabilities sum to {mass}")));
    }
    let n = total as f64;
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut pooled: Vec<(u64, f64)> = Vec::new();
    let mut cur: (Vec<usize>, u64, f64) = (Vec::new(), 0, 0.0);
    for (i, (&o, &p)) in observed.iter().zip(expected_probs).enumerate() {
        cur.0.push(i);
        cur.1 += o;
        cur.2 += p * n;
        if cur.2 >= MIN_EXPECTED {
            cells.push(std::mem::take(&mut cur.0));
            pooled.push((cur.1, cur.2));
            cur = (Vec::new(), 0, 0.0);
        }
    }
    if !cur.0.is_empty() {
        match (cells.last_mut(), pooled.last_mut()) {
            (Some(c), Some(q)) => {
                c.extend(cur.0);
                q.0 += cur.1;
                q.1 += cur.2;
            }
            _ => {
                cells.push(cur.0);
                pooled.push((cur.1, cur.2));
            }
        }
    }
    if pooled.len() < 2 {
        return Err(StatsError::Degenerate("fewer than two cells after pooling".into()));
    }
    let mut statistic = 0.0;
    for &(o, e) in &pooled {
        if e == 0.0 {
            if o > 0 {
                return Ok(Chi2Result { statistic: f64::INFINITY, dof: pooled.len() - 1, p_value: 0.0, cells });
            }
            continue;
        }
        statistic += (o as f64 - e).powi(2) / e;
    }
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| StatsError::Degenerate(e.to_string()))?;
    Ok(Chi2Result { statistic, dof, p_value: dist.sf(statistic), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{exponential, Stream};

    #[test]
    fn ks_exponential_calibration() {
        let mut s = Stream::new(3, crate::rng::domain::CALIBRATION, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| exponential(&mut s, 1.0)).collect();
        let r = ks_test(&xs, |x| 1.0 - (-x).exp()).unwrap();
        assert!(r.statistic < 1.36 / (1e5f64).sqrt() * 1.5, "{r:?}");
    }

    #[test]
    fn ks_constant_sample() {
        let c = 0.3;
        let xs = vec![c; 200];
        let cdf = |x: f64| x.clamp(0.0, 1.0);
        let r = ks_test(&xs, cdf).unwrap();
        assert!((r.statistic - 0.7f64.max(0.3)).abs() < 1e-12);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn ks_rejects_small_input() {
        assert!(matches!(ks_test(&[1.0; 10], |x| x), Err(StatsError::TooFewSamples { .. })));
    }

    #[test]
    fn kolmogorov_quantile() {
        // P(K > 1.3581) = 0.05
        assert!((kolmogorov_sf(1.358_099) - 0.05).abs() < 1e-5);
    }

    #[test]
    fn two_sample_same_law() {
        let mut s = Stream::new(4, crate::rng::domain::CALIBRATION, 0);
        let a: Vec<f64> = (0..5000).map(|_| exponential(&mut s, 1.0)).collect();
        let b: Vec<f64> = (0..5000).map(|_| exponential(&mut s, 1.0)).collect();
        let c: Vec<f64> = (0..5000).map(|_| exponential(&mut s, 2.0)).collect();
        assert!(ks_two_sample(&a, &b).unwrap().passes(0.001));
        assert!(!ks_two_sample(&a, &c).unwrap().passes(0.001));
    }

    #[test]
    fn chi2_pools_small_cells() {
        let r = chi2_test(&[50, 48, 1, 1], &[0.5, 0.48, 0.01, 0.01]).unwrap();
        assert_eq!(r.cells, vec![vec![0], vec![1, 2, 3]]);
        assert_eq!(r.dof, 1);
        assert!(r.statistic < 1e-9);
        assert!((r.p_value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn chi2_detects_mismatch() {
        let r = chi2_test(&[900, 100], &[0.5, 0.5]).unwrap();
        assert!(r.p_value < 1e-10);
        assert!(chi2_test(&[900, 100], &[0.5, 0.4]).is_err());
    }

    #[test]
    fn ratio_of_identical_samples_is_one() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ratio_estimate(&x, &x).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!(r.std_error < 1e-7);
    }
}
