//! CSV and JSON writers for tables and indicator series.

use std::io::Write;

use chrono::NaiveDate;
use serde::Serialize;

use crate::connectedness::{ConnectednessTable, RollingConnectedness};
use crate::dcca::DccaMatrix;
use crate::ingest::PricePanel;
use crate::pipeline::{IndicatorSeries, RollingConfig, WindowGap};
use crate::stats::{significance_stars, AcSeries, SummaryStats, REPORTED_LAGS};

pub type Result<T> = std::result::Result<T, csv::Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Six significant digits.
    #[default]
    Short,
    /// Shortest representation that round-trips.
    Full,
}

impl Precision {
    pub fn fmt(self, v: f64) -> String {
        if !v.is_finite() {
            return v.to_string();
        }
        match self {
            Precision::Full => format!("{v}"),
            Precision::Short => {
                let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float");
                if rounded == 0.0 {
                    "0".into()
                } else {
                    format!("{rounded}")
                }
            }
        }
    }
}

fn date(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(true).from_writer(w)
}

/// `window_end_date, window_start_date, L_<s>...`
pub fn write_tree_lengths<W: Write>(s: &IndicatorSeries, p: Precision, out: W) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["window_end_date".to_string(), "window_start_date".into()];
    header.extend(s.config.scales.iter().map(|k| format!("L_{k}")));
    w.write_record(&header)?;
    for r in &s.records {
        let mut row = vec![date(r.window_end), date(r.window_start)];
        row.extend(r.scales.iter().map(|x| p.fmt(x.tree_length)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dccc<W: Write>(s: &IndicatorSeries, p: Precision, out: W) -> Result<()> {
    let mut w = writer(out);
    let (s1, s2) = s.config.dccc_pair;
    w.write_record([
        "window_end_date".to_string(),
        format!("dccc_{s1}_{s2}"),
        format!("dccc_{s2}_{s1}"),
    ])?;
    for r in &s.records {
        w.write_record([date(r.window_end), p.fmt(r.dccc), p.fmt(r.dccc_reciprocal)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum<W: Write>(s: &IndicatorSeries, p: Precision, out: W) -> Result<()> {
    let mut w = writer(out);
    let with_full = s.records.iter().any(|r| r.spectrum_full.is_some());
    let mut header = vec![
        "window_end_date",
        "lambda_max",
        "mean_degree",
        "max_degree",
        "iterations",
    ];
    if with_full {
        header.extend(["lambda_max_full", "mean_degree_full", "max_degree_full"]);
    }
    w.write_record(&header)?;
    for r in &s.records {
        let sp = &r.spectrum;
        let mut row = vec![
            date(r.window_end),
            p.fmt(sp.lambda_max),
            p.fmt(sp.mean_degree),
            p.fmt(sp.max_degree),
            sp.iterations.to_string(),
        ];
        if let Some(f) = &r.spectrum_full {
            row.extend([
                p.fmt(f.lambda_max),
                p.fmt(f.mean_degree),
                p.fmt(f.max_degree),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_moments<W: Write>(s: &IndicatorSeries, p: Precision, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "window_end_date",
        "scale",
        "mean",
        "variance",
        "skewness",
        "kurtosis",
        "bandwidth",
    ])?;
    for r in &s.records {
        for x in &r.scales {
            let m = &x.moments;
            w.write_record([
                date(r.window_end),
                x.scale.to_string(),
                p.fmt(m.mean),
                p.fmt(m.variance),
                p.fmt(m.skewness),
                p.fmt(m.kurtosis),
                p.fmt(m.bandwidth),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Kernel density of the tree edge distances, long format.
pub fn write_densities<W: Write>(s: &IndicatorSeries, p: Precision, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["window_end_date", "scale", "x", "density"])?;
    for r in &s.records {
        for x in &r.scales {
            for &(g, f) in &x.moments.density {
                w.write_record([date(r.window_end), x.scale.to_string(), p.fmt(g), p.fmt(f)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rolling connectedness from the main pipeline.
pub fn write_pipeline_connectedness<W: Write>(
    s: &IndicatorSeries,
    p: Precision,
    out: W,
) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec![
        "window_end_date".to_string(),
        "total".into(),
        "explosive".into(),
    ];
    for t in &s.tickers {
        header.extend([format!("{t}_to"), format!("{t}_from"), format!("{t}_net")]);
    }
    w.write_record(&header)?;
    for r in &s.records {
        let Some(c) = &r.connectedness else { continue };
        let mut row = vec![date(r.window_end), p.fmt(c.total), c.explosive.to_string()];
        for j in 0..s.tickers.len() {
            row.extend([
                p.fmt(c.to_degree[j]),
                p.fmt(c.from_degree[j]),
                p.fmt(c.net_degree[j]),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_mst_edges<W: Write>(s: &IndicatorSeries, p: Precision, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["window_start", "window_end", "scale", "i", "j", "weight"])?;
    for r in &s.records {
        for x in &r.scales {
            for e in &x.edges {
                w.write_record([
                    date(r.window_start),
                    date(r.window_end),
                    x.scale.to_string(),
                    e.i.to_string(),
                    e.j.to_string(),
                    p.fmt(e.weight),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_garch_params<W: Write>(s: &IndicatorSeries, p: Precision, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "window_end_date",
        "ticker",
        "omega",
        "alpha",
        "beta",
        "converged",
        "iterations",
    ])?;
    for r in &s.records {
        for (t, g) in s.tickers.iter().zip(&r.garch) {
            w.write_record([
                date(r.window_end),
                t.clone(),
                p.fmt(g.params.omega()),
                p.fmt(g.params.alpha()),
                p.fmt(g.params.beta()),
                g.converged.to_string(),
                g.iterations.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_gaps<W: Write>(gaps: &[WindowGap], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["window_index", "window_end_date", "code", "message"])?;
    for g in gaps {
        let code = serde_json::to_value(g.code)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        w.write_record([
            g.window_index.to_string(),
            date(g.window_end),
            code,
            g.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Lower-triangular coefficient table preceded by a metadata row.
pub fn write_dcca_table<W: Write>(
    m: &DccaMatrix,
    tickers: &[String],
    metadata: &[(&str, String)],
    p: Precision,
    out: W,
) -> Result<()> {
    let mut w = writer(out);
    let meta: Vec<String> = std::iter::once("#".to_string())
        .chain(metadata.iter().map(|(k, v)| format!("{k}={v}")))
        .collect();
    w.write_record(&meta)?;
    let mut header = vec![String::new()];
    header.extend(tickers.iter().cloned());
    w.write_record(&header)?;
    for (i, t) in tickers.iter().enumerate() {
        let mut row = vec![t.clone()];
        for j in 0..tickers.len() {
            row.push(if j <= i {
                p.fmt(m.rho[[i, j]])
            } else {
                String::new()
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Statistic names in table order.
pub fn summary_row_names() -> Vec<String> {
    let mut names = vec![
        "ann_mean".to_string(),
        "ann_vol".into(),
        "skewness".into(),
        "kurtosis".into(),
    ];
    names.extend(REPORTED_LAGS.iter().map(|k| format!("ac_{k}")));
    names.extend(REPORTED_LAGS.iter().map(|k| format!("ac2_{k}")));
    names
}

/// One row per statistic; each ticker has a value and a stars column.
pub fn write_summary_table<W: Write>(
    tickers: &[String],
    stats: &[SummaryStats],
    p: Precision,
    out: W,
) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["statistic".to_string()];
    for t in tickers {
        header.extend([t.clone(), format!("{t}_stars")]);
    }
    w.write_record(&header)?;
    for (row_idx, name) in summary_row_names().into_iter().enumerate() {
        let mut row = vec![name];
        for s in stats {
            let (value, stars) = match row_idx {
                0 => (s.ann_mean, None),
                1 => (s.ann_vol, None),
                2 => (s.skewness, None),
                3 => (s.kurtosis, None),
                k => {
                    let lag_idx = (k - 4) % REPORTED_LAGS.len();
                    let lag = REPORTED_LAGS[lag_idx];
                    let (series, map) = if k < 4 + REPORTED_LAGS.len() {
                        (AcSeries::Returns, &s.ac)
                    } else {
                        (AcSeries::SquaredReturns, &s.ac_sq)
                    };
                    (map[&lag], s.p_value(series, lag).map(significance_stars))
                }
            };
            row.push(p.fmt(value));
            row.push(stars.unwrap_or("").to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Spillover matrix with a `From` column, `To` and `Net` rows and the total in the corner.
pub fn write_connectedness_table<W: Write>(
    tickers: &[String],
    t: &ConnectednessTable,
    p: Precision,
    out: W,
) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec![String::new()];
    header.extend(tickers.iter().cloned());
    header.push("From".into());
    w.write_record(&header)?;
    for (i, name) in tickers.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(t.d.row(i).iter().map(|&v| p.fmt(v)));
        row.push(p.fmt(t.from_degree[i]));
        w.write_record(&row)?;
    }
    let mut to = vec!["To".to_string()];
    to.extend(t.to_degree.iter().map(|&v| p.fmt(v)));
    to.push(p.fmt(t.total));
    w.write_record(&to)?;
    let mut net = vec!["Net".to_string()];
    net.extend(t.net_degree.iter().map(|&v| p.fmt(v)));
    net.push(String::new());
    w.write_record(&net)?;
    w.flush()?;
    Ok(())
}

/// `date, total` plus per-ticker to/from/net columns.
pub fn write_rolling_connectedness<W: Write>(
    tickers: &[String],
    r: &RollingConnectedness,
    p: Precision,
    out: W,
) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["date".to_string(), "total".into()];
    for t in tickers {
        header.extend([format!("{t}_to"), format!("{t}_from"), format!("{t}_net")]);
    }
    w.write_record(&header)?;
    for rec in &r.records {
        let mut row = vec![date(rec.window_end), p.fmt(rec.total)];
        for j in 0..tickers.len() {
            row.extend([
                p.fmt(rec.to_degree[j]),
                p.fmt(rec.from_degree[j]),
                p.fmt(rec.net_degree[j]),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Same layout as the input file.
pub fn write_price_panel<W: Write>(
    panel: &PricePanel,
    values: &ndarray::Array2<f64>,
    date_column: &str,
    p: Precision,
    out: W,
) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec![date_column.to_string()];
    header.extend(panel.tickers().iter().cloned());
    w.write_record(&header)?;
    for (i, d) in panel.dates().iter().enumerate() {
        let mut row = vec![date(*d)];
        row.extend(values.row(i).iter().map(|&v| p.fmt(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub input_sha256: String,
    pub tickers: Vec<String>,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub config: Option<RollingConfig>,
    pub settings: serde_json::Value,
    pub elapsed_seconds: f64,
    pub outputs: Vec<String>,
    pub gaps: Vec<WindowGap>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
