//! Loading, validating and aligning daily closing prices.
//!
//! Raw files carry one date column and one column per ticker. Each ticker
//! becomes a [`RawSeries`]; [`align`] then merges the series onto a common
//! calendar, which is needed because exchanges trade on different days.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("date column `{0}` not found in header")]
    MissingDateColumn(String),
    #[error("ticker column `{0}` not found in header")]
    MissingTickerColumn(String),
    #[error("row {row}: cannot parse date `{value}` (expected YYYY-MM-DD)")]
    BadDate { row: usize, value: String },
    #[error("row {row}, column `{column}`: cannot parse price `{value}`")]
    BadPrice {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: price {value} is not positive")]
    NonPositivePrice {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("series `{ticker}`: dates not strictly increasing at {date}")]
    UnorderedDates { ticker: String, date: NaiveDate },
    #[error("series `{0}` has no observations")]
    EmptySeries(String),
    #[error("need at least 2 series, got {0}")]
    TooFewSeries(usize),
    #[error("aligned panel has {0} dates; at least 2 are required")]
    TooFewDates(usize),
    #[error("the series share no common dates")]
    EmptyIntersection,
    #[error("series `{0}` does not overlap the others in time")]
    NoOverlap(String),
    #[error("column `{0}` is constant; it cannot be standardized")]
    ConstantColumn(String),
    #[error("panel shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Closing prices of one instrument, in calendar order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    ticker: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl RawSeries {
    pub fn new(ticker: impl Into<String>, observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let ticker = ticker.into();
        for pair in observations.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(IngestError::UnorderedDates {
                    ticker,
                    date: pair[1].0,
                });
            }
        }
        if let Some(&(_, close)) = observations
            .iter()
            .find(|(_, p)| !(*p > 0.0) || !p.is_finite())
        {
            return Err(IngestError::NonPositivePrice {
                row: 0,
                column: ticker,
                value: close,
            });
        }
        Ok(Self {
            ticker,
            observations,
        })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentPolicy {
    /// Keep only dates on which every series traded.
    #[default]
    Intersection,
    /// Union of dates; gaps take the last prior close of that series.
    ForwardFill,
}

/// Date-aligned T×N matrix of positive closing prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: Array2<f64>,
    alignment_policy: AlignmentPolicy,
}

impl PricePanel {
    /// Builds a panel from already aligned data, checking every invariant.
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        prices: Array2<f64>,
        alignment_policy: AlignmentPolicy,
    ) -> Result<Self> {
        if tickers.len() < 2 {
            return Err(IngestError::TooFewSeries(tickers.len()));
        }
        if dates.len() < 2 {
            return Err(IngestError::TooFewDates(dates.len()));
        }
        if prices.dim() != (dates.len(), tickers.len()) {
            return Err(IngestError::Shape(format!(
                "prices are {:?}, expected ({}, {})",
                prices.dim(),
                dates.len(),
                tickers.len()
            )));
        }
        for pair in dates.windows(2) {
            if pair[1] <= pair[0] {
                return Err(IngestError::UnorderedDates {
                    ticker: "<panel>".into(),
                    date: pair[1],
                });
            }
        }
        for ((row, col), &p) in prices.indexed_iter() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(IngestError::NonPositivePrice {
                    row: row + 1,
                    column: tickers[col].clone(),
                    value: p,
                });
            }
        }
        Ok(Self {
            dates,
            tickers,
            prices,
            alignment_policy,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> ArrayView2<'_, f64> {
        self.prices.view()
    }

    pub fn alignment_policy(&self) -> AlignmentPolicy {
        self.alignment_policy
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Splits the panel back into per-ticker series.
    pub fn to_series(&self) -> Vec<RawSeries> {
        self.tickers
            .iter()
            .enumerate()
            .map(|(j, ticker)| RawSeries {
                ticker: ticker.clone(),
                observations: self
                    .dates
                    .iter()
                    .copied()
                    .zip(self.prices.column(j).iter().copied())
                    .collect(),
            })
            .collect()
    }

    /// Contiguous sub-panel over rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.dates.len() || start >= end {
            return Err(IngestError::Shape(format!(
                "row range {start}..{end} outside 0..{}",
                self.dates.len()
            )));
        }
        Self::new(
            self.dates[start..end].to_vec(),
            self.tickers.clone(),
            self.prices.slice(ndarray::s![start..end, ..]).to_owned(),
            self.alignment_policy,
        )
    }
}

/// Log returns computed from raw closes: `r_t = ln P_t − ln P_{t−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    /// Date of the closing price that ends each return interval.
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// (T−1)×N
    pub returns: Array2<f64>,
}

impl ReturnPanel {
    pub fn from_prices(panel: &PricePanel) -> Self {
        Self {
            dates: panel.dates[1..].to_vec(),
            tickers: panel.tickers.clone(),
            returns: log_returns(panel.prices()),
        }
    }
}

pub fn log_returns(prices: ArrayView2<'_, f64>) -> Array2<f64> {
    let (t, n) = prices.dim();
    Array2::from_shape_fn((t.saturating_sub(1), n), |(i, j)| {
        prices[[i + 1, j]].ln() - prices[[i, j]].ln()
    })
}

fn parse_date(row: usize, raw: &str) -> Result<NaiveDate> {
    let trimmed = raw.trim();
    // Accept timestamps like 2013-03-05T00:00:00 or "2013-03-05 00:00:00-05:00"
    // by taking the calendar-day prefix; timezones are ignored.
    let day = trimmed.get(..10).unwrap_or(trimmed);
    NaiveDate::parse_from_str(day, "%Y-%m-%d").map_err(|_| IngestError::BadDate {
        row,
        value: raw.to_string(),
    })
}

/// Reads a wide price file. `ticker_columns = None` takes every column except the date.
pub fn load_csv(
    path: impl AsRef<Path>,
    date_column: &str,
    ticker_columns: Option<&[String]>,
) -> Result<Vec<RawSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, date_column, ticker_columns)
}

pub fn read_csv<R: Read>(
    reader: R,
    date_column: &str,
    ticker_columns: Option<&[String]>,
) -> Result<Vec<RawSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| IngestError::MissingDateColumn(date_column.to_string()))?;

    let columns: Vec<(usize, String)> = match ticker_columns {
        Some(names) => names
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .map(|i| (i, name.clone()))
                    .ok_or_else(|| IngestError::MissingTickerColumn(name.clone()))
            })
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != date_idx)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
    };

    let mut observations: Vec<Vec<(NaiveDate, f64)>> = vec![Vec::new(); columns.len()];
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based file line, counting the header.
        let row = k + 2;
        let date = parse_date(row, record.get(date_idx).unwrap_or(""))?;
        for (slot, (idx, name)) in columns.iter().enumerate() {
            let cell = record.get(*idx).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| IngestError::BadPrice {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(IngestError::NonPositivePrice {
                    row,
                    column: name.clone(),
                    value,
                });
            }
            observations[slot].push((date, value));
        }
    }

    columns
        .into_iter()
        .zip(observations)
        .map(|((_, ticker), obs)| RawSeries::new(ticker, obs))
        .collect()
}

/// Merges series onto one calendar according to `policy`.
pub fn align(series: &[RawSeries], policy: AlignmentPolicy) -> Result<PricePanel> {
    if series.len() < 2 {
        return Err(IngestError::TooFewSeries(series.len()));
    }
    if let Some(s) = series.iter().find(|s| s.is_empty()) {
        return Err(IngestError::EmptySeries(s.ticker.clone()));
    }
    let lookups: Vec<BTreeMap<NaiveDate, f64>> = series
        .iter()
        .map(|s| s.observations.iter().copied().collect())
        .collect();
    let tickers: Vec<String> = series.iter().map(|s| s.ticker.clone()).collect();

    let (dates, rows): (Vec<NaiveDate>, Vec<Vec<f64>>) = match policy {
        AlignmentPolicy::Intersection => {
            let dates: Vec<NaiveDate> = series[0]
                .observations
                .iter()
                .map(|&(d, _)| d)
                .filter(|d| lookups.iter().all(|m| m.contains_key(d)))
                .collect();
            if dates.is_empty() {
                return Err(IngestError::EmptyIntersection);
            }
            let rows = dates
                .iter()
                .map(|d| lookups.iter().map(|m| m[d]).collect())
                .collect();
            (dates, rows)
        }
        AlignmentPolicy::ForwardFill => {
            // Every series must have started before any other one ends,
            // otherwise the overlap is pure extrapolation.
            let latest_start = series
                .iter()
                .map(|s| s.observations[0].0)
                .max()
                .expect("non-empty");
            if let Some(s) = series
                .iter()
                .find(|s| s.observations.last().expect("non-empty").0 < latest_start)
            {
                return Err(IngestError::NoOverlap(s.ticker.clone()));
            }
            let union: BTreeSet<NaiveDate> = series
                .iter()
                .flat_map(|s| s.observations.iter().map(|&(d, _)| d))
                .collect();
            let mut last: Vec<Option<f64>> = vec![None; series.len()];
            let mut dates = Vec::new();
            let mut rows = Vec::new();
            for d in union {
                for (slot, m) in last.iter_mut().zip(&lookups) {
                    if let Some(&p) = m.get(&d) {
                        *slot = Some(p);
                    }
                }
                if last.iter().all(Option::is_some) {
                    dates.push(d);
                    rows.push(last.iter().map(|p| p.expect("checked")).collect());
                }
            }
            (dates, rows)
        }
    };

    let n = tickers.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let prices = Array2::from_shape_vec((dates.len(), n), flat)
        .map_err(|e| IngestError::Shape(e.to_string()))?;
    PricePanel::new(dates, tickers, prices, policy)
}

/// Column-wise `(P − mean) / σ_P` with the population standard deviation.
pub fn standardize_prices(panel: &PricePanel) -> Result<Array2<f64>> {
    let prices = panel.prices();
    let t = prices.nrows() as f64;
    let mut out = prices.to_owned();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / t;
        let var = col.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / t;
        let sd = var.sqrt();
        if !(sd > 0.0) || sd <= f64::EPSILON * mean.abs() {
            return Err(IngestError::ConstantColumn(panel.tickers[j].clone()));
        }
        col.mapv_inplace(|p| (p - mean) / sd);
    }
    Ok(out)
}
