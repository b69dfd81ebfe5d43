use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use dccanet::connectedness;
use dccanet::dcca::{self, BoxScheme};
use dccanet::garch;
use dccanet::ingest::{self, PricePanel};
use dccanet::pipeline::{self, Indicator, IndicatorSeries, WindowGap};
use dccanet::report::{self, Precision, RunManifest};
use dccanet::{sim, stats};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{self, Cli, Command, FileConfig, Globals, RunSettings};
use crate::UsageError;

struct Input {
    panel: PricePanel,
    sha256: String,
}

/// Collects written files relative to the output directory.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(BufWriter<File>) -> std::result::Result<(), csv::Error>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create output directory {}", parent.display()))?;
        }
        let file =
            File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        f(BufWriter::new(file)).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| p.strip_prefix(&self.dir).unwrap_or(p).display().to_string())
            .collect()
    }
}

fn load_input(g: &Globals) -> Result<Input> {
    let path = g
        .input
        .as_ref()
        .ok_or_else(|| UsageError("--input is required".into()))?;
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let series = ingest::read_csv(bytes.as_slice(), &g.date_column, None)
        .with_context(|| format!("in {}", path.display()))?;
    let panel =
        ingest::align(&series, g.alignment).with_context(|| format!("in {}", path.display()))?;
    Ok(Input {
        panel,
        sha256: report::sha256_hex(&bytes),
    })
}

fn precision(g: &Globals) -> Precision {
    if g.full_precision {
        Precision::Full
    } else {
        Precision::Short
    }
}

pub fn dispatch(cli: Cli) -> Result<Vec<PathBuf>> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let g = config::merge_globals(&cli.global, &file);
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let mut out = Outputs::new(&g.output_dir)?;
    match cli.command {
        Command::Stats(args) => {
            let days = args
                .annualization
                .or(file.annualization)
                .unwrap_or(stats::DEFAULT_TRADING_DAYS);
            cmd_stats(&g, days, &mut out)?
        }
        Command::DccaTable(args) => {
            let scale = args
                .scale
                .or(file.scale)
                .ok_or_else(|| UsageError("--scale is required".into()))?;
            let garch = !(args.no_garch || file.no_garch.unwrap_or(false));
            let scheme = args.box_scheme.or(file.box_scheme).unwrap_or_default();
            cmd_dcca_table(&g, scale, garch, scheme, &mut out)?
        }
        Command::Run(args) => {
            let settings = config::merge_run(&args, &file)?;
            if settings.windows.is_some() {
                cmd_sweep(&g, &settings, &mut out)?
            } else {
                cmd_run(&g, &settings, &mut out)?
            }
        }
        Command::Sweep(args) => {
            let settings = config::merge_run(&args, &file)?;
            if settings.windows.is_none() {
                anyhow::bail!(UsageError("sweep needs --windows".into()));
            }
            cmd_sweep(&g, &settings, &mut out)?
        }
        Command::Connectedness(args) => {
            let d = pipeline::VarSpec::default();
            let window = args.window.or(file.window).unwrap_or(250);
            let lags = args.lags.or(file.lags).unwrap_or(d.lags);
            let horizon = args.horizon.or(file.horizon).unwrap_or(d.horizon);
            cmd_connectedness(&g, window, lags, horizon, &mut out)?
        }
        Command::Standardize => cmd_standardize(&g, &mut out)?,
        Command::Simulate(args) => cmd_simulate(&g, &args, &mut out)?,
    }
    Ok(out.written)
}

fn cmd_stats(g: &Globals, trading_days: f64, out: &mut Outputs) -> Result<()> {
    let input = load_input(g)?;
    let returns = ingest::log_returns(input.panel.prices());
    let tickers = input.panel.tickers();
    let summaries = tickers
        .iter()
        .enumerate()
        .map(|(j, t)| {
            stats::summarize(&returns.column(j).to_vec(), trading_days)
                .with_context(|| format!("series `{t}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    out.write("table_a1.csv", |w| {
        report::write_summary_table(tickers, &summaries, precision(g), w)
    })
}

fn demeaned(x: ndarray::ArrayView1<'_, f64>) -> Vec<f64> {
    let mean = x.mean().unwrap_or(0.0);
    x.iter().map(|v| v - mean).collect()
}

fn cmd_dcca_table(
    g: &Globals,
    scale: usize,
    garch_on: bool,
    scheme: BoxScheme,
    out: &mut Outputs,
) -> Result<()> {
    let input = load_input(g)?;
    let panel = &input.panel;
    let raw = ingest::log_returns(panel.prices());
    let mut series = Array2::<f64>::zeros(raw.dim());
    for (j, t) in panel.tickers().iter().enumerate() {
        let x = demeaned(raw.column(j));
        let x = if garch_on {
            let fit = garch::fit(&x).with_context(|| format!("GARCH fit for `{t}`"))?;
            garch::filter(&x, &fit)?
        } else {
            x
        };
        series.column_mut(j).assign(&Array1::from(x));
    }
    let m = dcca::dcca_matrix(series.view(), scale, scheme, Some(panel.tickers()))?;
    let dates = panel.dates();
    let scheme_name = serde_json::to_value(scheme)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let meta = [
        ("scale", scale.to_string()),
        (
            "filter",
            if garch_on { "garch" } else { "none" }.to_string(),
        ),
        ("box_scheme", scheme_name),
        ("start", dates[0].to_string()),
        ("end", dates[dates.len() - 1].to_string()),
        ("clamped", m.clamp_count.to_string()),
    ];
    out.write(&format!("dcca_table_s{scale}.csv"), |w| {
        report::write_dcca_table(&m, panel.tickers(), &meta, precision(g), w)
    })
}

fn write_series(
    s: &IndicatorSeries,
    settings: &RunSettings,
    p: Precision,
    prefix: &str,
    out: &mut Outputs,
) -> Result<()> {
    out.write(&format!("{prefix}tree_lengths.csv"), |w| {
        report::write_tree_lengths(s, p, w)
    })?;
    out.write(&format!("{prefix}dccc.csv"), |w| {
        report::write_dccc(s, p, w)
    })?;
    out.write(&format!("{prefix}spectrum.csv"), |w| {
        report::write_spectrum(s, p, w)
    })?;
    out.write(&format!("{prefix}moments.csv"), |w| {
        report::write_moments(s, p, w)
    })?;
    if s.config.connectedness.is_some() {
        out.write(&format!("{prefix}connectedness.csv"), |w| {
            report::write_pipeline_connectedness(s, p, w)
        })?;
    }
    if settings.export_edges {
        out.write(&format!("{prefix}mst_edges.csv"), |w| {
            report::write_mst_edges(s, p, w)
        })?;
    }
    if settings.export_garch {
        out.write(&format!("{prefix}garch_params.csv"), |w| {
            report::write_garch_params(s, p, w)
        })?;
    }
    if settings.export_density {
        out.write(&format!("{prefix}densities.csv"), |w| {
            report::write_densities(s, p, w)
        })?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    g: &Globals,
    command: &str,
    input: &Input,
    config: Option<dccanet::RollingConfig>,
    settings: serde_json::Value,
    started: Instant,
    gaps: Vec<WindowGap>,
    out: &mut Outputs,
) -> Result<()> {
    let dates = input.panel.dates();
    let mut outputs = out.names();
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        input_sha256: input.sha256.clone(),
        tickers: input.panel.tickers().to_vec(),
        start_date: dates[0],
        end_date: dates[dates.len() - 1],
        config,
        settings: json!({ "globals": g, "command": settings }),
        elapsed_seconds: started.elapsed().as_secs_f64(),
        outputs,
        gaps,
    };
    let path = out.dir.join("manifest.json");
    std::fs::create_dir_all(&out.dir)?;
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    out.written.push(path);
    Ok(())
}

fn cmd_run(g: &Globals, settings: &RunSettings, out: &mut Outputs) -> Result<()> {
    let started = Instant::now();
    let input = load_input(g)?;
    let s = pipeline::run(&input.panel, &settings.config)?;
    write_series(&s, settings, precision(g), "", out)?;
    let gaps = s.gaps.clone();
    write_manifest(
        g,
        "run",
        &input,
        Some(settings.config.clone()),
        serde_json::to_value(settings)?,
        started,
        gaps,
        out,
    )
}

fn cmd_sweep(g: &Globals, settings: &RunSettings, out: &mut Outputs) -> Result<()> {
    let started = Instant::now();
    let input = load_input(g)?;
    let windows = settings.windows.clone().unwrap_or_default();
    let sweep = pipeline::sensitivity_sweep(&input.panel, &settings.config, &windows)?;
    let p = precision(g);
    let mut summary = Vec::new();
    let mut gaps = Vec::new();
    for (w, s) in &sweep {
        write_series(s, settings, p, &format!("w{w}/"), out)?;
        let corr = |a: Indicator| -> String {
            match (s.column(a), s.column(Indicator::LambdaMax)) {
                (Ok(x), Ok(y)) => pipeline::indicator_correlation(&x, &y)
                    .map(|c| p.fmt(c))
                    .unwrap_or_default(),
                _ => String::new(),
            }
        };
        summary.push([
            w.to_string(),
            s.records.len().to_string(),
            s.gaps.len().to_string(),
            corr(Indicator::Dccc),
            corr(Indicator::DcccReciprocal),
        ]);
        gaps.extend(s.gaps.iter().cloned());
    }
    out.write("sweep_summary.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record([
            "window",
            "records",
            "gaps",
            "corr_dccc_lambda",
            "corr_dccc_reciprocal_lambda",
        ])?;
        for row in &summary {
            csv.write_record(row)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    write_manifest(
        g,
        "sweep",
        &input,
        Some(settings.config.clone()),
        serde_json::to_value(settings)?,
        started,
        gaps,
        out,
    )
}

fn cmd_connectedness(
    g: &Globals,
    window: usize,
    lags: usize,
    horizon: usize,
    out: &mut Outputs,
) -> Result<()> {
    let started = Instant::now();
    let input = load_input(g)?;
    let panel = &input.panel;
    let returns = ingest::log_returns(panel.prices());
    let (_, table) = connectedness::window_connectedness(returns.view(), lags, horizon)
        .context("full-sample connectedness")?;
    // window counts prices, so it spans window − 1 returns
    let return_window = window
        .checked_sub(1)
        .filter(|&w| w > 0)
        .ok_or_else(|| UsageError("--window must be at least 2".into()))?;
    let rolling = connectedness::rolling_total_connectedness(
        returns.view(),
        &panel.dates()[1..],
        return_window,
        lags,
        horizon,
    )?;
    let p = precision(g);
    out.write("connectedness_table.csv", |w| {
        report::write_connectedness_table(panel.tickers(), &table, p, w)
    })?;
    out.write("connectedness_rolling.csv", |w| {
        report::write_rolling_connectedness(panel.tickers(), &rolling, p, w)
    })?;
    let gaps = rolling
        .gaps
        .iter()
        .map(|f| WindowGap {
            window_index: f.window_index,
            window_end: f.window_end,
            code: pipeline::GapCode::VarFailure,
            message: f.reason.clone(),
        })
        .collect();
    write_manifest(
        g,
        "connectedness",
        &input,
        None,
        json!({ "window": window, "lags": lags, "horizon": horizon }),
        started,
        gaps,
        out,
    )
}

fn cmd_standardize(g: &Globals, out: &mut Outputs) -> Result<()> {
    let input = load_input(g)?;
    let z = ingest::standardize_prices(&input.panel)?;
    out.write("standardized_prices.csv", |w| {
        report::write_price_panel(&input.panel, &z, &g.date_column, precision(g), w)
    })
}

fn cmd_simulate(g: &Globals, args: &config::SimulateArgs, out: &mut Outputs) -> Result<()> {
    if args.assets < 2 || args.days < 2 {
        anyhow::bail!(UsageError(
            "simulate needs at least 2 assets and 2 days".into()
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let switch = args.switch_at.unwrap_or(args.days / 2);
    let r = sim::equicorrelated_returns(
        args.days,
        args.assets,
        args.rho_before,
        args.rho_after,
        switch,
        &mut rng,
    ) * args.volatility;
    let panel = sim::price_panel_from_returns(&r, sim::default_tickers(args.assets));
    let prices = panel.prices().to_owned();
    out.write("simulated_prices.csv", |w| {
        report::write_price_panel(&panel, &prices, &g.date_column, Precision::Full, w)
    })
}
