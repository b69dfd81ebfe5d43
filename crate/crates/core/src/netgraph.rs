//! Minimum spanning trees, tree-length indicators and spectral measures of
//! the complete distance network.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcca::DistanceMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("network needs at least {need} nodes, got {got}")]
    TooFewNodes { got: usize, need: usize },
    #[error("weight ({i}, {j}) = {w} is not a finite non-negative number")]
    BadWeight { i: usize, j: usize, w: f64 },
    #[error("long-scale tree length is zero")]
    ZeroTreeLength,
    #[error("matrix is not square, symmetric and non-negative")]
    NotSymmetricNonNegative,
    #[error("matrix is all zeros")]
    ZeroMatrix,
    #[error("power iteration did not converge in {iterations} iterations (last λ = {lambda})")]
    NoConvergence { iterations: usize, lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MstResult {
    pub scale: usize,
    /// N − 1 edges in insertion order, each with `i < j`.
    pub edges: Vec<MstEdge>,
    /// Mean edge weight `L(s, t)`.
    pub tree_length: f64,
    /// Symmetric N×N matrix holding tree weights, 0 off the tree.
    pub mst_adjacency: Array2<f64>,
}

impl MstResult {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }
}

/// Prim's algorithm on the complete graph, grown from node 0.
///
/// Ties between equal-weight crossing edges go to the lexicographically
/// smallest `(i, j)` pair.
pub fn prim_mst(d: &DistanceMatrix) -> Result<MstResult, GraphError> {
    let mut result = prim_on(d.d.view())?;
    result.scale = d.scale;
    Ok(result)
}

pub fn prim_on(w: ArrayView2<'_, f64>) -> Result<MstResult, GraphError> {
    let n = w.nrows();
    if n < 2 {
        return Err(GraphError::TooFewNodes { got: n, need: 2 });
    }
    for i in 0..n {
        for j in 0..n {
            let v = w[[i, j]];
            if i != j && (!v.is_finite() || v < 0.0) {
                return Err(GraphError::BadWeight { i, j, w: v });
            }
        }
    }

    let pair = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut in_tree = vec![false; n];
    // Best crossing edge for each outside node: (weight, (i, j)).
    let mut best: Vec<Option<(f64, (usize, usize))>> = vec![None; n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = Some((w[[0, v]], pair(0, v)));
    }

    let mut edges = Vec::with_capacity(n - 1);
    let mut adjacency = Array2::zeros((n, n));
    for _ in 1..n {
        let (next, (weight, (i, j))) = (0..n)
            .filter(|&v| !in_tree[v])
            .map(|v| (v, best[v].expect("outside nodes have a candidate")))
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.1 .1.cmp(&b.1 .1)))
            .expect("an outside node remains");
        in_tree[next] = true;
        edges.push(MstEdge { i, j, weight });
        adjacency[[i, j]] = weight;
        adjacency[[j, i]] = weight;

        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let cand = (w[[next, v]], pair(next, v));
            let current = best[v].expect("set at start");
            if cand.0 < current.0 || (cand.0 == current.0 && cand.1 < current.1) {
                best[v] = Some(cand);
            }
        }
    }

    let tree_length = edges.iter().map(|e| e.weight).sum::<f64>() / (n - 1) as f64;
    Ok(MstResult {
        scale: 0,
        edges,
        tree_length,
        mst_adjacency: adjacency,
    })
}

/// `L(s₁) / L(s₂)` for a short scale `s₁` and long scale `s₂`.
pub fn dccc(l_short: f64, l_long: f64) -> Result<f64, GraphError> {
    if l_long == 0.0 {
        return Err(GraphError::ZeroTreeLength);
    }
    Ok(l_short / l_long)
}

/// Min–max rescaling of a series onto [0, 1]; a flat series maps to 0.
pub fn rescale_unit(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda_max: f64,
    /// Mean weighted degree ⟨k⟩.
    pub mean_degree: f64,
    /// Largest weighted degree.
    pub max_degree: f64,
    pub iterations: usize,
}

impl SpectralResult {
    /// `⟨k⟩ ≤ λ_max ≤ k_max` up to a relative tolerance.
    pub fn satisfies_perron_bounds(&self, rel_tol: f64) -> bool {
        let slack = rel_tol * self.max_degree.abs().max(1.0);
        self.mean_degree - slack <= self.lambda_max && self.lambda_max <= self.max_degree + slack
    }
}

pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
pub const DEFAULT_EIGEN_MAX_ITER: usize = 10_000;

/// Perron root of a symmetric non-negative matrix by power iteration from the
/// all-ones vector.
///
/// The iteration runs on `A + c·I` with `c = ⟨k⟩ / 2`. Trees and other
/// bipartite graphs have `−λ_max` in their spectrum too, and unshifted power
/// iteration would stall between the two.
pub fn dominant_eigenvalue(
    a: ArrayView2<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralResult, GraphError> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(GraphError::NotSymmetricNonNegative);
    }
    for i in 0..n {
        for j in 0..n {
            if !(a[[i, j]] >= 0.0) || a[[i, j]] != a[[j, i]] || !a[[i, j]].is_finite() {
                return Err(GraphError::NotSymmetricNonNegative);
            }
        }
    }
    let degrees: Array1<f64> = a.sum_axis(ndarray::Axis(1));
    let mean_degree = degrees.sum() / n as f64;
    let max_degree = degrees.iter().copied().fold(0.0, f64::max);
    if max_degree == 0.0 {
        return Err(GraphError::ZeroMatrix);
    }

    let shift = 0.5 * mean_degree;
    let mut x = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = f64::NAN;
    for iter in 1..=max_iter {
        let y = a.dot(&x) + shift * &x;
        let rayleigh = x.dot(&y) - shift;
        let norm = y.dot(&y).sqrt();
        x = y / norm;
        let converged = (rayleigh - lambda).abs() < tol * rayleigh.abs().max(1.0);
        lambda = rayleigh;
        if converged {
            return Ok(SpectralResult {
                lambda_max: lambda,
                mean_degree,
                max_degree,
                iterations: iter,
            });
        }
    }
    Err(GraphError::NoConvergence {
        iterations: max_iter,
        lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMoments {
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub skewness: f64,
    /// Raw kurtosis (Gaussian = 3).
    pub kurtosis: f64,
    pub bandwidth: f64,
    pub density: Vec<(f64, f64)>,
}

pub const DENSITY_POINTS: usize = 256;
/// Grid half-padding around the sample, in bandwidths. At 7h the Gaussian
/// tail mass left outside is ~1e-12, so the grid integrates to one.
pub const DENSITY_PAD_BANDWIDTHS: f64 = 7.0;

/// Type-7 (linear interpolation) sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `0.9 · min(σ, IQR/1.34) · n^{−1/5}`.
///
/// Falls back to σ when the IQR is zero, and to a tenth of the mean magnitude
/// (or 1e-3) when the sample has no spread at all.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        _ => return if mean != 0.0 { 0.1 * mean.abs() } else { 1e-3 },
    };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel density on an evenly spaced grid.
pub fn kernel_density(values: &[f64], bandwidth: f64, points: usize) -> Vec<(f64, f64)> {
    let lo =
        values.iter().copied().fold(f64::INFINITY, f64::min) - DENSITY_PAD_BANDWIDTHS * bandwidth;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        + DENSITY_PAD_BANDWIDTHS * bandwidth;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|k| {
            let x = lo + k as f64 * step;
            let f: f64 = values
                .iter()
                .map(|v| (-0.5 * ((x - v) / bandwidth).powi(2)).exp())
                .sum();
            (x, f * norm)
        })
        .collect()
}

pub fn edge_moments(mst: &MstResult) -> Result<EdgeMoments, GraphError> {
    let w = mst.weights();
    if w.len() < 2 {
        return Err(GraphError::TooFewNodes {
            got: w.len() + 1,
            need: 3,
        });
    }
    let (mean, m2, m3, m4) = crate::stats::central_moments(&w);
    let spread = m2 > 1e-28 * mean * mean;
    let bandwidth = silverman_bandwidth(&w);
    Ok(EdgeMoments {
        mean,
        variance: m2,
        skewness: if spread { m3 / m2.powf(1.5) } else { 0.0 },
        kurtosis: if spread { m4 / (m2 * m2) } else { 0.0 },
        bandwidth,
        density: kernel_density(&w, bandwidth, DENSITY_POINTS),
    })
}

/// Trapezoidal integral of a sampled curve.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|p| 0.5 * (p[1].0 - p[0].0) * (p[0].1 + p[1].1))
        .sum()
}
