//! Variance-decomposition connectedness (Diebold–Yilmaz).
//!
//! A VAR(p) is fitted by OLS, its moving-average coefficients `A_h` give the
//! H-step generalized variance decomposition
//!
//! ```text
//! θ_ij = σ_jj⁻¹ Σ_{h<H} (e_i' A_h Σ e_j)² / Σ_{h<H} e_i' A_h Σ A_h' e_i
//! ```
//!
//! and the row-normalized table `d_ij = 100 θ_ij / Σ_j θ_ij` yields the
//! directional and total connectedness measures.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LAGS: usize = 3;
pub const DEFAULT_HORIZON: usize = 12;

/// Singular values below this fraction of the largest mark a rank-deficient design.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConnectednessError {
    #[error("lag order must be at least 1")]
    ZeroLags,
    #[error("{got} observations are too few for a VAR({p}) in {n} variables (need {need})")]
    TooShort {
        got: usize,
        need: usize,
        n: usize,
        p: usize,
    },
    #[error("regressor matrix is rank deficient")]
    RankDeficient,
    #[error("forecast horizon must be at least 1")]
    ZeroHorizon,
    #[error("residual variance of variable {0} is not positive")]
    NonPositiveVariance(usize),
    #[error("forecast-error variance of variable {0} is zero")]
    ZeroDenominator(usize),
    #[error("row {0} of the decomposition sums to zero")]
    ZeroRowSum(usize),
    #[error("decomposition has a negative or non-finite entry at ({0}, {1})")]
    NegativeEntry(usize, usize),
    #[error("window of {window} observations is longer than the sample of {len}")]
    WindowTooLong { window: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, ConnectednessError>;

#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub p: usize,
    /// `coefficients[k]` multiplies `y_{t−k−1}`.
    pub coefficients: Vec<Array2<f64>>,
    pub intercept: Array1<f64>,
    /// Residual covariance with denominator `T − p`.
    pub sigma: Array2<f64>,
    /// Largest modulus among companion-matrix eigenvalues.
    pub spectral_radius: f64,
}

impl VarModel {
    pub fn n(&self) -> usize {
        self.intercept.len()
    }

    pub fn is_explosive(&self) -> bool {
        self.spectral_radius >= 1.0
    }

    /// Moving-average matrices `A_0 = I`, `A_h = Σ_{k=1..min(h,p)} Φ_k A_{h−k}`.
    pub fn ma_coefficients(&self, horizon: usize) -> Vec<Array2<f64>> {
        let n = self.n();
        let mut out: Vec<Array2<f64>> = Vec::with_capacity(horizon);
        for h in 0..horizon {
            if h == 0 {
                out.push(Array2::<f64>::eye(n));
                continue;
            }
            let mut a = Array2::zeros((n, n));
            for k in 1..=h.min(self.p) {
                a = a + self.coefficients[k - 1].dot(&out[h - k]);
            }
            out.push(a);
        }
        out
    }
}

pub fn min_observations(n: usize, p: usize) -> usize {
    n * p + n + 10
}

fn companion_radius(coefficients: &[Array2<f64>]) -> f64 {
    let p = coefficients.len();
    let n = coefficients[0].nrows();
    let dim = n * p;
    let mut c = DMatrix::<f64>::zeros(dim, dim);
    for (k, phi) in coefficients.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                c[(i, k * n + j)] = phi[[i, j]];
            }
        }
    }
    for i in n..dim {
        c[(i, i - n)] = 1.0;
    }
    c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Equation-by-equation OLS with intercept on a T×N return matrix.
pub fn fit_var(returns: ArrayView2<'_, f64>, p: usize) -> Result<VarModel> {
    if p == 0 {
        return Err(ConnectednessError::ZeroLags);
    }
    let (t, n) = returns.dim();
    let need = min_observations(n, p);
    if t < need {
        return Err(ConnectednessError::TooShort { got: t, need, n, p });
    }
    let rows = t - p;
    let k = 1 + n * p;
    let z = DMatrix::from_fn(rows, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / n + 1;
            let var = (c - 1) % n;
            returns[[r + p - lag, var]]
        }
    });
    let y = DMatrix::from_fn(rows, n, |r, c| returns[[r + p, c]]);

    let svd = z.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_min <= RANK_TOL * s_max {
        return Err(ConnectednessError::RankDeficient);
    }
    let beta = svd
        .solve(&y, 0.0)
        .map_err(|_| ConnectednessError::RankDeficient)?;
    let resid = &y - &z * &beta;
    let sigma_na = resid.transpose() * &resid / rows as f64;

    let intercept = Array1::from_shape_fn(n, |i| beta[(0, i)]);
    let coefficients: Vec<Array2<f64>> = (0..p)
        .map(|lag| Array2::from_shape_fn((n, n), |(i, j)| beta[(1 + lag * n + j, i)]))
        .collect();
    let mut sigma = Array2::from_shape_fn((n, n), |(i, j)| sigma_na[(i, j)]);
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (sigma[[i, j]] + sigma[[j, i]]);
            sigma[[i, j]] = v;
            sigma[[j, i]] = v;
        }
    }
    let spectral_radius = companion_radius(&coefficients);
    Ok(VarModel {
        p,
        coefficients,
        intercept,
        sigma,
        spectral_radius,
    })
}

/// Raw (unnormalized) generalized variance decomposition at horizon `h`.
pub fn gvd(model: &VarModel, horizon: usize) -> Result<Array2<f64>> {
    if horizon == 0 {
        return Err(ConnectednessError::ZeroHorizon);
    }
    let n = model.n();
    let sigma = &model.sigma;
    if let Some(j) = (0..n).find(|&j| !(sigma[[j, j]] > 0.0)) {
        return Err(ConnectednessError::NonPositiveVariance(j));
    }
    let mut num = Array2::<f64>::zeros((n, n));
    let mut den = Array1::<f64>::zeros(n);
    for a in model.ma_coefficients(horizon) {
        let a_sigma = a.dot(sigma);
        num = num + a_sigma.mapv(|v| v * v);
        // (A Σ A')_ii = Σ_j (AΣ)_ij A_ij
        den = den + (&a_sigma * &a).sum_axis(ndarray::Axis(1));
    }
    let mut theta = Array2::zeros((n, n));
    for i in 0..n {
        if !(den[i] > 0.0) {
            return Err(ConnectednessError::ZeroDenominator(i));
        }
        for j in 0..n {
            theta[[i, j]] = num[[i, j]] / sigma[[j, j]] / den[i];
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessTable {
    /// Row-normalized decomposition in percent.
    pub d: Array2<f64>,
    /// Off-diagonal row sums: received from others.
    pub from_degree: Array1<f64>,
    /// Off-diagonal column sums: transmitted to others.
    pub to_degree: Array1<f64>,
    pub net_degree: Array1<f64>,
    /// `(1/N) Σ_{i≠j} d_ij`.
    pub total: f64,
}

pub fn connectedness_table(theta: &Array2<f64>) -> Result<ConnectednessTable> {
    let n = theta.nrows();
    for ((i, j), &v) in theta.indexed_iter() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(ConnectednessError::NegativeEntry(i, j));
        }
    }
    let mut d = theta.clone();
    for (i, mut row) in d.rows_mut().into_iter().enumerate() {
        let sum = row.sum();
        if !(sum > 0.0) {
            return Err(ConnectednessError::ZeroRowSum(i));
        }
        row.mapv_inplace(|v| 100.0 * v / sum);
    }
    let diag = d.diag().to_owned();
    let from_degree = d.sum_axis(ndarray::Axis(1)) - &diag;
    let to_degree = d.sum_axis(ndarray::Axis(0)) - &diag;
    let net_degree = &to_degree - &from_degree;
    let total = from_degree.sum() / n as f64;
    Ok(ConnectednessTable {
        d,
        from_degree,
        to_degree,
        net_degree,
        total,
    })
}

/// Fit, decompose and normalize in one step.
pub fn window_connectedness(
    returns: ArrayView2<'_, f64>,
    p: usize,
    horizon: usize,
) -> Result<(VarModel, ConnectednessTable)> {
    let model = fit_var(returns, p)?;
    let theta = gvd(&model, horizon)?;
    let table = connectedness_table(&theta)?;
    Ok((model, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessRecord {
    pub window_index: usize,
    pub window_end: NaiveDate,
    pub total: f64,
    pub to_degree: Vec<f64>,
    pub from_degree: Vec<f64>,
    pub net_degree: Vec<f64>,
    pub explosive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub window_index: usize,
    pub window_end: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RollingConnectedness {
    pub records: Vec<ConnectednessRecord>,
    pub gaps: Vec<WindowFailure>,
}

impl RollingConnectedness {
    pub fn totals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total).collect()
    }
}

/// Connectedness over every window of `w` consecutive return rows.
///
/// `dates[t]` labels return row `t`; failed windows become gaps.
pub fn rolling_total_connectedness(
    returns: ArrayView2<'_, f64>,
    dates: &[NaiveDate],
    w: usize,
    p: usize,
    horizon: usize,
) -> Result<RollingConnectedness> {
    let t = returns.nrows();
    if w > t {
        return Err(ConnectednessError::WindowTooLong { window: w, len: t });
    }
    let need = min_observations(returns.ncols(), p);
    if w < need {
        return Err(ConnectednessError::TooShort {
            got: w,
            need,
            n: returns.ncols(),
            p,
        });
    }
    let outcomes: Vec<std::result::Result<ConnectednessRecord, WindowFailure>> = (0..=t - w)
        .into_par_iter()
        .map(|start| {
            let window = returns.slice(ndarray::s![start..start + w, ..]);
            let end = dates[start + w - 1];
            match window_connectedness(window, p, horizon) {
                Ok((model, table)) => Ok(ConnectednessRecord {
                    window_index: start,
                    window_end: end,
                    total: table.total,
                    to_degree: table.to_degree.to_vec(),
                    from_degree: table.from_degree.to_vec(),
                    net_degree: table.net_degree.to_vec(),
                    explosive: model.is_explosive(),
                }),
                Err(e) => Err(WindowFailure {
                    window_index: start,
                    window_end: end,
                    reason: e.to_string(),
                }),
            }
        })
        .collect();
    let mut out = RollingConnectedness::default();
    for o in outcomes {
        match o {
            Ok(r) => out.records.push(r),
            Err(g) => out.gaps.push(g),
        }
    }
    Ok(out)
}
