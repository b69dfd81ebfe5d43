//! Synthetic data generators with known ground truth.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::garch::GarchParams;
use crate::ingest::{AlignmentPolicy, PricePanel};

const GARCH_BURN_IN: usize = 500;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_noise<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// GARCH(1,1) path with Gaussian innovations, started from the unconditional variance.
pub fn garch_path<R: Rng + ?Sized>(params: &GarchParams, n: usize, rng: &mut R) -> Vec<f64> {
    let mut h = params.unconditional_variance();
    let mut r = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n + GARCH_BURN_IN {
        if t > 0 {
            h = params.omega() + params.alpha() * r * r + params.beta() * h;
        }
        r = h.sqrt() * normal(rng);
        if t >= GARCH_BURN_IN {
            out.push(r);
        }
    }
    out
}

/// Two standard normal series with correlation `rho`.
pub fn correlated_pair<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let c = (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            let a = normal(rng);
            let b = normal(rng);
            (a, rho * a + c * b)
        })
        .unzip()
}

/// `n × assets` standard normal returns with every pairwise correlation equal
/// to `rho_before` on rows `< switch_at` and `rho_after` afterwards.
pub fn equicorrelated_returns<R: Rng + ?Sized>(
    n: usize,
    assets: usize,
    rho_before: f64,
    rho_after: f64,
    switch_at: usize,
    rng: &mut R,
) -> Array2<f64> {
    let mut out = Array2::zeros((n, assets));
    for t in 0..n {
        let rho = if t < switch_at { rho_before } else { rho_after };
        let (load, idio) = (rho.sqrt(), (1.0 - rho).sqrt());
        let factor = normal(rng);
        for j in 0..assets {
            out[[t, j]] = load * factor + idio * normal(rng);
        }
    }
    out
}

/// VAR(1) `y_t = Φ y_{t−1} + ε_t` with i.i.d. standard normal shocks.
pub fn var1_path<R: Rng + ?Sized>(coef: &Array2<f64>, n: usize, rng: &mut R) -> Array2<f64> {
    let k = coef.nrows();
    let burn = 200;
    let mut y = vec![0.0; k];
    let mut out = Array2::zeros((n, k));
    for t in 0..n + burn {
        let next: Vec<f64> = (0..k)
            .map(|i| (0..k).map(|j| coef[[i, j]] * y[j]).sum::<f64>() + normal(rng))
            .collect();
        y = next;
        if t >= burn {
            for i in 0..k {
                out[[t - burn, i]] = y[i];
            }
        }
    }
    out
}

/// Weekdays starting at `start` (or the first weekday after it).
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Turns a T×N matrix of log returns into a (T+1)×N price panel starting at 100.
pub fn price_panel_from_returns(returns: &Array2<f64>, tickers: Vec<String>) -> PricePanel {
    let (t, n) = returns.dim();
    let mut prices = Array2::zeros((t + 1, n));
    for j in 0..n {
        let mut log_p = 100f64.ln();
        prices[[0, j]] = 100.0;
        for i in 0..t {
            log_p += returns[[i, j]];
            prices[[i + 1, j]] = log_p.exp();
        }
    }
    let dates = business_days(NaiveDate::from_ymd_opt(2013, 3, 5).expect("valid"), t + 1);
    PricePanel::new(dates, tickers, prices, AlignmentPolicy::Intersection)
        .expect("simulated panel is valid")
}

pub fn default_tickers(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("S{i}")).collect()
}
