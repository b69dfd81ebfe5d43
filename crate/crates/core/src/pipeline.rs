//! Rolling-window evaluation of the network indicators.
//!
//! Window `t` covers price rows `[t, t + w − 1]`. Inside it the log returns
//! are recomputed, demeaned and (optionally) GARCH-filtered per series; then,
//! for every scale, the DCCA distance matrix is reduced to its minimum
//! spanning tree. Windows are independent and evaluated in parallel, and the
//! results are merged in window order.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::connectedness::{self, ConnectednessTable};
use crate::dcca::{self, BoxScheme, DccaMatrix, ScaleSpec, MIN_SCALE};
use crate::garch::{self, GarchFit, GarchParams};
use crate::ingest::{log_returns, PricePanel};
use crate::netgraph::{self, EdgeMoments, MstEdge, SpectralResult};

/// Minimum number of paired points for an indicator correlation.
pub const MIN_CORRELATION_POINTS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),
    #[error("panel has {dates} dates but the window needs {window}")]
    PanelTooShort { dates: usize, window: usize },
    #[error("global GARCH fit failed for `{ticker}`: {reason}")]
    GlobalGarch { ticker: String, reason: String },
    #[error("only {got} paired observations; at least {need} are required")]
    InsufficientOverlap { got: usize, need: usize },
    #[error("indicator `{0}` is not part of this run")]
    UnknownIndicator(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GarchMode {
    /// Refit inside every window for every series.
    #[default]
    PerWindow,
    /// Fit once on the full sample and slice the filtered returns.
    Global,
    /// Use demeaned raw returns.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenTarget {
    /// Tree-restricted adjacency.
    #[default]
    Mst,
    /// Complete weighted network.
    Full,
    /// Both; the tree result stays the primary column.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenWeights {
    /// DCCA distances.
    #[default]
    Distance,
    /// Absolute DCCA coefficients.
    AbsRho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    pub lags: usize,
    pub horizon: usize,
    /// Feed GARCH-filtered instead of raw returns to the VAR.
    pub filtered: bool,
}

impl Default for VarSpec {
    fn default() -> Self {
        Self {
            lags: connectedness::DEFAULT_LAGS,
            horizon: connectedness::DEFAULT_HORIZON,
            filtered: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    /// Window length in price observations.
    pub window: usize,
    pub scales: Vec<usize>,
    /// `(s₁, s₂)` with `s₁ < s₂`.
    pub dccc_pair: (usize, usize),
    /// Scale whose network feeds the eigenvalue; defaults to `s₂`.
    pub eigen_scale: Option<usize>,
    pub garch: GarchMode,
    pub box_scheme: BoxScheme,
    pub eigen_target: EigenTarget,
    pub eigen_weights: EigenWeights,
    pub connectedness: Option<VarSpec>,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window: 250,
            scales: vec![21, 84],
            dccc_pair: (21, 84),
            eigen_scale: None,
            garch: GarchMode::PerWindow,
            box_scheme: BoxScheme::Forward,
            eigen_target: EigenTarget::Mst,
            eigen_weights: EigenWeights::Distance,
            connectedness: None,
        }
    }
}

impl RollingConfig {
    pub fn eigen_scale(&self) -> usize {
        self.eigen_scale.unwrap_or(self.dccc_pair.1)
    }

    /// Checks every rule and reports all violations together.
    pub fn validate(&self, n_assets: Option<usize>) -> Result<()> {
        let mut issues = Vec::new();
        let returns = self.window.saturating_sub(1);
        if self.scales.is_empty() {
            issues.push("at least one scale is required".to_string());
        }
        for &s in &self.scales {
            if s < MIN_SCALE {
                issues.push(format!("scale {s} is below the minimum of {MIN_SCALE}"));
            } else if 2 * s > returns {
                issues.push(format!(
                    "scale {s} needs at least {} returns per window, but window {} yields {returns}",
                    2 * s,
                    self.window
                ));
            }
        }
        let (s1, s2) = self.dccc_pair;
        if s1 >= s2 {
            issues.push(format!("DCCC pair ({s1}, {s2}) must have s1 < s2"));
        }
        for s in [s1, s2, self.eigen_scale()] {
            if !self.scales.contains(&s) {
                issues.push(format!(
                    "scale {s} is used by an indicator but missing from scales"
                ));
            }
        }
        if let Some(spec) = &self.connectedness {
            if spec.lags == 0 {
                issues.push("VAR lag order must be at least 1".into());
            }
            if spec.horizon == 0 {
                issues.push("forecast horizon must be at least 1".into());
            }
            if let Some(n) = n_assets {
                let need = connectedness::min_observations(n, spec.lags);
                if returns < need {
                    issues.push(format!(
                        "VAR({}) in {n} variables needs {need} returns per window, window yields {returns}",
                        spec.lags
                    ));
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            issues.dedup();
            Err(PipelineError::InvalidConfig(issues))
        }
    }

    fn scale_index(&self, s: usize) -> usize {
        self.scales.iter().position(|&x| x == s).expect("validated")
    }
}

/// Machine-readable cause of a skipped window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapCode {
    GarchFailure,
    DegenerateSeries,
    ZeroTreeLength,
    EigenFailure,
    /// Used by standalone rolling connectedness runs.
    VarFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowGap {
    pub window_index: usize,
    pub window_end: NaiveDate,
    pub code: GapCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GarchSummary {
    pub params: GarchParams,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRecord {
    pub scale: usize,
    pub tree_length: f64,
    pub edges: Vec<MstEdge>,
    pub moments: EdgeMoments,
    pub clamp_count: usize,
    pub max_clamp_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectednessSummary {
    pub total: f64,
    pub to_degree: Vec<f64>,
    pub from_degree: Vec<f64>,
    pub net_degree: Vec<f64>,
    pub explosive: bool,
}

impl From<&ConnectednessTable> for ConnectednessSummary {
    fn from(t: &ConnectednessTable) -> Self {
        Self {
            total: t.total,
            to_degree: t.to_degree.to_vec(),
            from_degree: t.from_degree.to_vec(),
            net_degree: t.net_degree.to_vec(),
            explosive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRecord {
    pub window_index: usize,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    /// One entry per configured scale, in configuration order.
    pub scales: Vec<ScaleRecord>,
    /// `L(s₁) / L(s₂)`.
    pub dccc: f64,
    /// `L(s₂) / L(s₁)`.
    pub dccc_reciprocal: f64,
    /// Eigenvalue of the primary target (tree unless the target is `Full`).
    pub spectrum: SpectralResult,
    /// Complete-network eigenvalue when the target is `Both`.
    pub spectrum_full: Option<SpectralResult>,
    /// Per-series GARCH fits; empty when filtering is off.
    pub garch: Vec<GarchSummary>,
    pub connectedness: Option<ConnectednessSummary>,
    /// Reason the connectedness table could not be computed, if it was requested.
    pub connectedness_error: Option<String>,
}

impl WindowRecord {
    pub fn tree_length(&self, scale: usize) -> Option<f64> {
        self.scales
            .iter()
            .find(|r| r.scale == scale)
            .map(|r| r.tree_length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Indicator {
    TreeLength(usize),
    Dccc,
    DcccReciprocal,
    LambdaMax,
    LambdaMaxFull,
    MeanDegree,
    MaxDegree,
    ConnectednessTotal,
}

/// Indicator values keyed by window index, gaps omitted.
pub type IndicatorColumn = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorSeries {
    pub config: RollingConfig,
    pub tickers: Vec<String>,
    pub n_windows: usize,
    pub records: Vec<WindowRecord>,
    pub gaps: Vec<WindowGap>,
}

impl IndicatorSeries {
    pub fn column(&self, indicator: Indicator) -> Result<IndicatorColumn> {
        let pick = |r: &WindowRecord| -> Option<f64> {
            match indicator {
                Indicator::TreeLength(s) => r.tree_length(s),
                Indicator::Dccc => Some(r.dccc),
                Indicator::DcccReciprocal => Some(r.dccc_reciprocal),
                Indicator::LambdaMax => Some(r.spectrum.lambda_max),
                Indicator::LambdaMaxFull => r.spectrum_full.map(|s| s.lambda_max),
                Indicator::MeanDegree => Some(r.spectrum.mean_degree),
                Indicator::MaxDegree => Some(r.spectrum.max_degree),
                Indicator::ConnectednessTotal => r.connectedness.as_ref().map(|c| c.total),
            }
        };
        let col: IndicatorColumn = self
            .records
            .iter()
            .filter_map(|r| pick(r).map(|v| (r.window_index, v)))
            .collect();
        if col.is_empty() && !self.records.is_empty() {
            return Err(PipelineError::UnknownIndicator(format!("{indicator:?}")));
        }
        Ok(col)
    }
}

/// Pearson correlation over the windows present in both columns.
pub fn indicator_correlation(a: &IndicatorColumn, b: &IndicatorColumn) -> Result<f64> {
    let lookup: HashMap<usize, f64> = b.iter().copied().collect();
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .filter_map(|&(k, x)| lookup.get(&k).map(|&y| (x, y)))
        .collect();
    if pairs.len() < MIN_CORRELATION_POINTS {
        return Err(PipelineError::InsufficientOverlap {
            got: pairs.len(),
            need: MIN_CORRELATION_POINTS,
        });
    }
    Ok(pearson(&pairs))
}

pub fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Memoizes GARCH fits by the content hash of the fitted slice.
///
/// Fits are deterministic, so a hit returns exactly what a fresh fit would.
type SharedFit = Arc<std::result::Result<GarchFit, garch::GarchError>>;

#[derive(Debug, Default)]
pub struct GarchCache {
    fits: Mutex<HashMap<[u8; 32], SharedFit>>,
}

impl GarchCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.fits.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(x: &[f64]) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for v in x {
            hasher.update(v.to_le_bytes());
        }
        hasher.finalize().into()
    }

    pub fn fit(&self, x: &[f64]) -> SharedFit {
        let key = Self::key(x);
        if let Some(hit) = self.fits.lock().expect("cache lock").get(&key) {
            return Arc::clone(hit);
        }
        let fitted = Arc::new(garch::fit(x));
        self.fits
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(fitted)
            .clone()
    }
}

fn demean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

struct WindowInput<'a> {
    index: usize,
    start: NaiveDate,
    end: NaiveDate,
    /// Raw log returns for the window, (w−1)×N.
    returns: ArrayView2<'a, f64>,
    /// Pre-filtered returns when GARCH runs globally.
    global_filtered: Option<ArrayView2<'a, f64>>,
}

type WindowOutcome = std::result::Result<WindowRecord, WindowGap>;

fn evaluate_window(
    input: WindowInput<'_>,
    config: &RollingConfig,
    tickers: &[String],
    cache: Option<&GarchCache>,
) -> WindowOutcome {
    let gap = |code: GapCode, message: String| WindowGap {
        window_index: input.index,
        window_end: input.end,
        code,
        message,
    };
    let (rows, n) = input.returns.dim();

    let mut demeaned = Array2::<f64>::zeros((rows, n));
    for j in 0..n {
        let mut col = input.returns.column(j).to_vec();
        demean(&mut col);
        demeaned.column_mut(j).assign(&ndarray::Array1::from(col));
    }

    let mut garch_fits = Vec::new();
    let filtered: Array2<f64> = match (config.garch, input.global_filtered) {
        (GarchMode::Off, _) => demeaned.clone(),
        (GarchMode::Global, Some(pre)) => pre.to_owned(),
        (GarchMode::Global, None) => unreachable!("global filter is computed up front"),
        (GarchMode::PerWindow, _) => {
            let mut out = Array2::<f64>::zeros((rows, n));
            for (j, ticker) in tickers.iter().enumerate() {
                let col = demeaned.column(j).to_vec();
                let fitted = match cache {
                    Some(c) => c.fit(&col),
                    None => Arc::new(garch::fit(&col)),
                };
                let fit = match fitted.as_ref() {
                    Ok(f) => f,
                    Err(e) => return Err(gap(GapCode::GarchFailure, format!("`{ticker}`: {e}"))),
                };
                let f = garch::filter(&col, fit).expect("lengths match");
                out.column_mut(j).assign(&ndarray::Array1::from(f));
                garch_fits.push(GarchSummary {
                    params: fit.params,
                    converged: fit.converged,
                    iterations: fit.iterations,
                });
            }
            out
        }
    };

    let mut scale_records = Vec::with_capacity(config.scales.len());
    let mut eigen_inputs: Option<(DccaMatrix, Array2<f64>, netgraph::MstResult)> = None;
    for &s in &config.scales {
        let m = dcca::dcca_matrix(filtered.view(), s, config.box_scheme, Some(tickers))
            .map_err(|e| gap(GapCode::DegenerateSeries, e.to_string()))?;
        let d = dcca::to_distance(&m);
        let mst =
            netgraph::prim_mst(&d).map_err(|e| gap(GapCode::DegenerateSeries, e.to_string()))?;
        let moments = netgraph::edge_moments(&mst)
            .map_err(|e| gap(GapCode::DegenerateSeries, e.to_string()))?;
        scale_records.push(ScaleRecord {
            scale: s,
            tree_length: mst.tree_length,
            edges: mst.edges.clone(),
            moments,
            clamp_count: m.clamp_count,
            max_clamp_excess: m.max_clamp_excess,
        });
        if s == config.eigen_scale() {
            eigen_inputs = Some((m, d.d, mst));
        }
    }

    let (s1, s2) = config.dccc_pair;
    let l1 = scale_records[config.scale_index(s1)].tree_length;
    let l2 = scale_records[config.scale_index(s2)].tree_length;
    let dccc = netgraph::dccc(l1, l2).map_err(|e| gap(GapCode::ZeroTreeLength, e.to_string()))?;
    let dccc_reciprocal =
        netgraph::dccc(l2, l1).map_err(|e| gap(GapCode::ZeroTreeLength, e.to_string()))?;

    let (rho, full_d, mst) = eigen_inputs.expect("eigen scale validated");
    let weights = |tree: bool| -> Array2<f64> {
        match (config.eigen_weights, tree) {
            (EigenWeights::Distance, true) => mst.mst_adjacency.clone(),
            (EigenWeights::Distance, false) => full_d.clone(),
            (EigenWeights::AbsRho, true) => {
                let mut w = Array2::zeros(rho.rho.raw_dim());
                for e in &mst.edges {
                    let v = rho.rho[[e.i, e.j]].abs();
                    w[[e.i, e.j]] = v;
                    w[[e.j, e.i]] = v;
                }
                w
            }
            (EigenWeights::AbsRho, false) => {
                let mut w = rho.rho.mapv(f64::abs);
                w.diag_mut().fill(0.0);
                w
            }
        }
    };
    let eigen = |a: Array2<f64>| {
        netgraph::dominant_eigenvalue(
            a.view(),
            netgraph::DEFAULT_EIGEN_TOL,
            netgraph::DEFAULT_EIGEN_MAX_ITER,
        )
        .map_err(|e| gap(GapCode::EigenFailure, e.to_string()))
    };
    let (spectrum, spectrum_full) = match config.eigen_target {
        EigenTarget::Mst => (eigen(weights(true))?, None),
        EigenTarget::Full => (eigen(weights(false))?, None),
        EigenTarget::Both => (eigen(weights(true))?, Some(eigen(weights(false))?)),
    };

    let (connectedness, connectedness_error) = match &config.connectedness {
        None => (None, None),
        Some(spec) => {
            let source = if spec.filtered { &filtered } else { &demeaned };
            match connectedness::window_connectedness(source.view(), spec.lags, spec.horizon) {
                Ok((model, table)) => {
                    let mut summary = ConnectednessSummary::from(&table);
                    summary.explosive = model.is_explosive();
                    (Some(summary), None)
                }
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };

    Ok(WindowRecord {
        window_index: input.index,
        window_start: input.start,
        window_end: input.end,
        scales: scale_records,
        dccc,
        dccc_reciprocal,
        spectrum,
        spectrum_full,
        garch: garch_fits,
        connectedness,
        connectedness_error,
    })
}

fn global_filter(returns: &Array2<f64>, tickers: &[String]) -> Result<Array2<f64>> {
    let mut out = returns.clone();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let mut x = col.to_vec();
        demean(&mut x);
        let fail = |e: garch::GarchError| PipelineError::GlobalGarch {
            ticker: tickers[j].clone(),
            reason: e.to_string(),
        };
        let fit = garch::fit(&x).map_err(fail)?;
        let f = garch::filter(&x, &fit).map_err(fail)?;
        col.assign(&ndarray::Array1::from(f));
    }
    Ok(out)
}

pub fn run(panel: &PricePanel, config: &RollingConfig) -> Result<IndicatorSeries> {
    run_with_cache(panel, config, None)
}

pub fn run_with_cache(
    panel: &PricePanel,
    config: &RollingConfig,
    cache: Option<&GarchCache>,
) -> Result<IndicatorSeries> {
    config.validate(Some(panel.n_assets()))?;
    let t = panel.n_dates();
    let w = config.window;
    if t < w {
        return Err(PipelineError::PanelTooShort {
            dates: t,
            window: w,
        });
    }
    ScaleSpec::new(config.scales.iter().copied())
        .and_then(|s| s.check_length(w - 1))
        .map_err(|e| PipelineError::InvalidConfig(vec![e.to_string()]))?;

    let returns = log_returns(panel.prices());
    let global = match config.garch {
        GarchMode::Global => Some(global_filter(&returns, panel.tickers())?),
        _ => None,
    };
    let dates = panel.dates();
    let tickers = panel.tickers();
    let n_windows = t - w + 1;

    let outcomes: Vec<WindowOutcome> = (0..n_windows)
        .into_par_iter()
        .map(|start| {
            // price rows start..start+w ⇒ return rows start..start+w−1
            let rows = start..start + w - 1;
            let input = WindowInput {
                index: start,
                start: dates[start],
                end: dates[start + w - 1],
                returns: returns.slice(ndarray::s![rows.clone(), ..]),
                global_filtered: global.as_ref().map(|g| g.slice(ndarray::s![rows, ..])),
            };
            evaluate_window(input, config, tickers, cache)
        })
        .collect();

    let mut records = Vec::with_capacity(n_windows);
    let mut gaps = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(g) => gaps.push(g),
        }
    }
    Ok(IndicatorSeries {
        config: config.clone(),
        tickers: tickers.to_vec(),
        n_windows,
        records,
        gaps,
    })
}

/// Independent runs for each window length; GARCH fits are shared through a cache.
pub fn sensitivity_sweep(
    panel: &PricePanel,
    base: &RollingConfig,
    windows: &[usize],
) -> Result<BTreeMap<usize, IndicatorSeries>> {
    let cache = GarchCache::new();
    let mut issues = Vec::new();
    for &w in windows {
        let cfg = RollingConfig {
            window: w,
            ..base.clone()
        };
        if let Err(PipelineError::InvalidConfig(list)) = cfg.validate(Some(panel.n_assets())) {
            issues.extend(list.into_iter().map(|m| format!("w={w}: {m}")));
        }
    }
    if !issues.is_empty() {
        return Err(PipelineError::InvalidConfig(issues));
    }
    windows
        .iter()
        .map(|&w| {
            let cfg = RollingConfig {
                window: w,
                ..base.clone()
            };
            run_with_cache(panel, &cfg, Some(&cache)).map(|s| (w, s))
        })
        .collect()
}
