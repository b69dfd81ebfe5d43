//! GARCH(1,1) volatility filter.
//!
//! Parameters are estimated by Gaussian maximum likelihood with the variance
//! recursion `h_t = ω + α r²_{t−1} + β h_{t−1}`, seeded with the sample
//! variance. The simplex search runs on an unconstrained reparameterization:
//!
//! ```text
//! ω = exp(u₀)
//! α + β = 0.9999 · logistic(u₁)
//! α / (α + β) = logistic(u₂)
//! ```
//!
//! so every trial point satisfies `ω > 0`, `α, β ≥ 0`, `α + β < 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{self, SimplexOptions};

pub const MIN_OBSERVATIONS: usize = 50;
/// Upper bound on the persistence `α + β`.
pub const MAX_PERSISTENCE: f64 = 0.9999;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error, PartialEq)]
pub enum GarchError {
    #[error("need at least {MIN_OBSERVATIONS} observations, got {0}")]
    TooShort(usize),
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("infeasible parameters: omega={omega}, alpha={alpha}, beta={beta}")]
    InfeasibleParams { omega: f64, alpha: f64, beta: f64 },
    #[error("length mismatch: {returns} returns vs {variances} variances")]
    LengthMismatch { returns: usize, variances: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    omega: f64,
    alpha: f64,
    beta: f64,
}

impl GarchParams {
    pub fn new(omega: f64, alpha: f64, beta: f64) -> Result<Self, GarchError> {
        let ok =
            omega > 0.0 && omega.is_finite() && alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0;
        if ok {
            Ok(Self { omega, alpha, beta })
        } else {
            Err(GarchError::InfeasibleParams { omega, alpha, beta })
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }

    fn to_unconstrained(self) -> [f64; 3] {
        let p = self.persistence() / MAX_PERSISTENCE;
        let share = self.alpha / self.persistence();
        [self.omega.ln(), logit(p), logit(share)]
    }

    fn from_unconstrained(u: &[f64]) -> Self {
        let persistence = MAX_PERSISTENCE * logistic(u[1]);
        let share = logistic(u[2]);
        Self {
            omega: u[0].exp(),
            alpha: persistence * share,
            beta: persistence * (1.0 - share),
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub log_likelihood: f64,
    /// Conditional variances, one per input observation.
    pub h: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Conditional variance path for `params`, seeded with `h_1 = h0`.
pub fn variance_path(returns: &[f64], params: &GarchParams, h0: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(returns.len());
    let mut prev = h0;
    for t in 0..returns.len() {
        if t > 0 {
            let r = returns[t - 1];
            prev = params.omega + params.alpha * r * r + params.beta * prev;
        }
        h.push(prev);
    }
    h
}

/// Gaussian log-likelihood `Σ −½(ln 2π + ln h_t + r_t²/h_t)`.
pub fn log_likelihood(returns: &[f64], params: &GarchParams, h0: f64) -> f64 {
    let mut ll = 0.0;
    let mut h = h0;
    for t in 0..returns.len() {
        if t > 0 {
            let r = returns[t - 1];
            h = params.omega + params.alpha * r * r + params.beta * h;
        }
        let r = returns[t];
        ll -= 0.5 * (LN_2PI + h.ln() + r * r / h);
    }
    ll
}

/// Starting point of the search, relative to the sample variance.
pub fn initial_params(sample_var: f64) -> GarchParams {
    GarchParams {
        omega: 0.05 * sample_var,
        alpha: 0.05,
        beta: 0.90,
    }
}

/// Fits GARCH(1,1) to an already demeaned series.
pub fn fit(returns: &[f64]) -> Result<GarchFit, GarchError> {
    fit_with(returns, &SimplexOptions::default())
}

pub fn fit_with(returns: &[f64], opts: &SimplexOptions) -> Result<GarchFit, GarchError> {
    if returns.len() < MIN_OBSERVATIONS {
        return Err(GarchError::TooShort(returns.len()));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(GarchError::NonFinite);
    }
    let h0 = sample_variance(returns);
    if !(h0 > 0.0) {
        return Err(GarchError::ZeroVariance);
    }

    let start = initial_params(h0).to_unconstrained();
    let result = optim::minimize(
        |u| -log_likelihood(returns, &GarchParams::from_unconstrained(u), h0),
        &start,
        opts,
    );
    let params = GarchParams::from_unconstrained(&result.x);
    GarchParams::new(params.omega, params.alpha, params.beta)?;
    let h = variance_path(returns, &params, h0);
    Ok(GarchFit {
        params,
        log_likelihood: -result.value,
        h,
        converged: result.converged,
        iterations: result.iterations,
    })
}

/// Devolatilized returns `r_t / √h_t`.
pub fn filter(returns: &[f64], fit: &GarchFit) -> Result<Vec<f64>, GarchError> {
    if returns.len() != fit.h.len() {
        return Err(GarchError::LengthMismatch {
            returns: returns.len(),
            variances: fit.h.len(),
        });
    }
    Ok(returns
        .iter()
        .zip(&fit.h)
        .map(|(r, h)| r / h.sqrt())
        .collect())
}
