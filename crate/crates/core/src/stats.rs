//! Descriptive statistics for daily return series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// Lags at which autocorrelations are reported.
pub const REPORTED_LAGS: [usize; 4] = [1, 5, 10, 20];

pub const DEFAULT_TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series has {got} observations; at least {need} are required")]
    TooShort { got: usize, need: usize },
    #[error("series has zero variance")]
    ZeroVariance,
}

/// Which series an autocorrelation test refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcSeries {
    Returns,
    SquaredReturns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub ann_mean: f64,
    pub ann_vol: f64,
    pub skewness: f64,
    /// Raw kurtosis; a Gaussian has 3.
    pub kurtosis: f64,
    pub ac: BTreeMap<usize, f64>,
    pub ac_sq: BTreeMap<usize, f64>,
    /// Ljung–Box p-values up to each reported lag.
    pub significance: BTreeMap<(AcSeries, usize), f64>,
}

impl SummaryStats {
    pub fn p_value(&self, series: AcSeries, lag: usize) -> Option<f64> {
        self.significance.get(&(series, lag)).copied()
    }
}

/// Central moments m2, m3, m4 (population) and the mean.
pub(crate) fn central_moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

/// Skewness `m3 / m2^1.5`.
pub fn skewness(x: &[f64]) -> f64 {
    let (_, m2, m3, _) = central_moments(x);
    m3 / m2.powf(1.5)
}

/// Raw kurtosis `m4 / m2²`.
pub fn kurtosis(x: &[f64]) -> f64 {
    let (_, m2, _, m4) = central_moments(x);
    m4 / (m2 * m2)
}

/// Sample autocorrelation at `lag` using the full-sample mean and variance.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if lag >= n || denom == 0.0 {
        return 0.0;
    }
    let num: f64 = (0..n - lag)
        .map(|t| (x[t] - mean) * (x[t + lag] - mean))
        .sum();
    num / denom
}

/// Ljung–Box `Q = T(T+2) Σ_{k≤h} ρ_k² / (T−k)` and its χ²(h) p-value.
pub fn ljung_box(x: &[f64], max_lag: usize) -> (f64, f64) {
    let n = x.len() as f64;
    let q = n
        * (n + 2.0)
        * (1..=max_lag)
            .map(|k| autocorrelation(x, k).powi(2) / (n - k as f64))
            .sum::<f64>();
    let chi2 = ChiSquared::new(max_lag as f64).expect("positive dof");
    (q, 1.0 - chi2.cdf(q))
}

/// Stars at the 0.05 / 0.01 / 0.001 levels.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

pub fn summarize(returns: &[f64], trading_days_per_year: f64) -> Result<SummaryStats, StatsError> {
    let max_lag = *REPORTED_LAGS.last().expect("non-empty");
    let need = max_lag + 1;
    if returns.len() < need {
        return Err(StatsError::TooShort {
            got: returns.len(),
            need,
        });
    }
    let (mean, m2, m3, m4) = central_moments(returns);
    if !(m2 > 0.0) || m2.sqrt() <= 1e-14 * mean.abs() {
        return Err(StatsError::ZeroVariance);
    }
    let n = returns.len() as f64;
    let sample_var = m2 * n / (n - 1.0);
    let squared: Vec<f64> = returns.iter().map(|r| r * r).collect();

    let mut ac = BTreeMap::new();
    let mut ac_sq = BTreeMap::new();
    let mut significance = BTreeMap::new();
    for lag in REPORTED_LAGS {
        ac.insert(lag, autocorrelation(returns, lag));
        ac_sq.insert(lag, autocorrelation(&squared, lag));
        significance.insert((AcSeries::Returns, lag), ljung_box(returns, lag).1);
        significance.insert((AcSeries::SquaredReturns, lag), ljung_box(&squared, lag).1);
    }

    Ok(SummaryStats {
        ann_mean: mean * trading_days_per_year,
        ann_vol: sample_var.sqrt() * trading_days_per_year.sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
        ac,
        ac_sq,
        significance,
    })
}
