//! Command-line flags, the flat TOML config file, and their merge.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dccanet::ingest::AlignmentPolicy;
use dccanet::pipeline::{EigenTarget, EigenWeights, GarchMode};
use dccanet::BoxScheme;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Parses a kebab-case enum name through its serde representation.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unrecognized value `{s}`"))
}

#[derive(Debug, Parser)]
#[command(
    name = "dccanet",
    version,
    about = "Multiscale DCCA networks and connectedness indicators"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// Price CSV: a date column plus one column per ticker.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Name of the date column.
    #[arg(long, global = true)]
    pub date_column: Option<String>,
    /// Date alignment: intersection or forward-fill.
    #[arg(long, global = true, value_parser = kebab::<AlignmentPolicy>)]
    pub alignment: Option<AlignmentPolicy>,
    /// Directory for all outputs (created if missing).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Seed for the simulators.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for window evaluation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print numbers with full precision instead of 6 significant digits.
    #[arg(long, global = true)]
    pub full_precision: bool,
    /// Flat TOML file with the same keys as the long flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summary statistics table of daily log returns.
    Stats(StatsArgs),
    /// Full-sample DCCA coefficient table at one scale.
    DccaTable(DccaTableArgs),
    /// Rolling-window network indicators.
    Run(RunArgs),
    /// Rolling indicators for several window lengths.
    Sweep(RunArgs),
    /// VAR-based connectedness table and rolling total.
    Connectedness(ConnectednessArgs),
    /// Prices divided by their sample standard deviation after demeaning.
    Standardize,
    /// Write a simulated price panel with a correlation regime shift.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Default)]
pub struct StatsArgs {
    /// Trading days per year.
    #[arg(long)]
    pub annualization: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct DccaTableArgs {
    /// Box length in trading days.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Skip GARCH filtering.
    #[arg(long)]
    pub no_garch: bool,
    /// forward or forward-backward.
    #[arg(long, value_parser = kebab::<BoxScheme>)]
    pub box_scheme: Option<BoxScheme>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Window length in price observations.
    #[arg(long)]
    pub window: Option<usize>,
    /// Comma-separated window lengths; runs a sweep.
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
    /// Comma-separated scales.
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<usize>>,
    /// Short and long scale of the tree-length ratio, e.g. `21,84`.
    #[arg(long, value_delimiter = ',')]
    pub dccc: Option<Vec<usize>>,
    /// Scale of the network used for the eigenvalue.
    #[arg(long)]
    pub eigen_scale: Option<usize>,
    /// mst, full or both.
    #[arg(long, value_parser = kebab::<EigenTarget>)]
    pub eigen_target: Option<EigenTarget>,
    /// distance or abs-rho.
    #[arg(long, value_parser = kebab::<EigenWeights>)]
    pub eigen_weights: Option<EigenWeights>,
    /// per-window, global or off.
    #[arg(long, value_parser = kebab::<GarchMode>)]
    pub garch: Option<GarchMode>,
    /// Same as `--garch off`.
    #[arg(long)]
    pub no_garch: bool,
    /// forward or forward-backward.
    #[arg(long, value_parser = kebab::<BoxScheme>)]
    pub box_scheme: Option<BoxScheme>,
    /// Also compute rolling connectedness.
    #[arg(long)]
    pub connectedness: bool,
    /// VAR lag order.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Forecast horizon of the variance decomposition.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Write per-window tree edges.
    #[arg(long)]
    pub export_edges: bool,
    /// Write per-window GARCH parameters.
    #[arg(long)]
    pub export_garch: bool,
    /// Write per-window edge-length densities.
    #[arg(long)]
    pub export_density: bool,
}

#[derive(Debug, Args, Default)]
pub struct ConnectednessArgs {
    /// Rolling window length in price observations.
    #[arg(long)]
    pub window: Option<usize>,
    /// VAR lag order.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Forecast horizon of the variance decomposition.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1500)]
    pub days: usize,
    #[arg(long, default_value_t = 9)]
    pub assets: usize,
    #[arg(long, default_value_t = 0.2)]
    pub rho_before: f64,
    #[arg(long, default_value_t = 0.8)]
    pub rho_after: f64,
    /// Day of the correlation switch; defaults to the midpoint.
    #[arg(long)]
    pub switch_at: Option<usize>,
    /// Daily return scale.
    #[arg(long, default_value_t = 0.01)]
    pub volatility: f64,
}

/// Every key accepted in the config file.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub date_column: Option<String>,
    pub alignment: Option<AlignmentPolicy>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub full_precision: Option<bool>,
    pub annualization: Option<f64>,
    pub scale: Option<usize>,
    pub window: Option<usize>,
    pub windows: Option<Vec<usize>>,
    pub scales: Option<Vec<usize>>,
    pub dccc: Option<Vec<usize>>,
    pub eigen_scale: Option<usize>,
    pub eigen_target: Option<EigenTarget>,
    pub eigen_weights: Option<EigenWeights>,
    pub garch: Option<GarchMode>,
    pub no_garch: Option<bool>,
    pub box_scheme: Option<BoxScheme>,
    pub connectedness: Option<bool>,
    pub lags: Option<usize>,
    pub horizon: Option<usize>,
    pub export_edges: Option<bool>,
    pub export_garch: Option<bool>,
    pub export_density: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// Global settings after merging flags over the file.
#[derive(Debug, Clone, Serialize)]
pub struct Globals {
    pub input: Option<PathBuf>,
    pub date_column: String,
    pub alignment: AlignmentPolicy,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub full_precision: bool,
}

pub fn merge_globals(cli: &GlobalArgs, file: &FileConfig) -> Globals {
    Globals {
        input: cli.input.clone().or_else(|| file.input.clone()),
        date_column: cli
            .date_column
            .clone()
            .or_else(|| file.date_column.clone())
            .unwrap_or_else(|| "Date".into()),
        alignment: cli.alignment.or(file.alignment).unwrap_or_default(),
        output_dir: cli
            .output_dir
            .clone()
            .or_else(|| file.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        seed: cli.seed.or(file.seed).unwrap_or(42),
        threads: cli.threads.or(file.threads),
        full_precision: cli.full_precision || file.full_precision.unwrap_or(false),
    }
}

/// Rolling-run settings after merging flags over the file.
#[derive(Debug, Clone, Serialize)]
pub struct RunSettings {
    pub config: dccanet::RollingConfig,
    pub windows: Option<Vec<usize>>,
    pub export_edges: bool,
    pub export_garch: bool,
    pub export_density: bool,
}

pub fn merge_run(cli: &RunArgs, file: &FileConfig) -> Result<RunSettings> {
    let base = dccanet::RollingConfig::default();
    let scales = cli
        .scales
        .clone()
        .or_else(|| file.scales.clone())
        .unwrap_or(base.scales.clone());
    let dccc = match cli.dccc.clone().or_else(|| file.dccc.clone()) {
        Some(v) if v.len() == 2 => (v[0], v[1]),
        Some(v) => anyhow::bail!(crate::UsageError(format!(
            "--dccc takes exactly two scales, got {}",
            v.len()
        ))),
        None => base.dccc_pair,
    };
    let no_garch = cli.no_garch || file.no_garch.unwrap_or(false);
    let garch = if no_garch {
        GarchMode::Off
    } else {
        cli.garch.or(file.garch).unwrap_or(base.garch)
    };
    let connectedness = (cli.connectedness || file.connectedness.unwrap_or(false)).then(|| {
        let d = dccanet::pipeline::VarSpec::default();
        dccanet::pipeline::VarSpec {
            lags: cli.lags.or(file.lags).unwrap_or(d.lags),
            horizon: cli.horizon.or(file.horizon).unwrap_or(d.horizon),
            filtered: false,
        }
    });
    let config = dccanet::RollingConfig {
        window: cli.window.or(file.window).unwrap_or(base.window),
        scales,
        dccc_pair: dccc,
        eigen_scale: cli.eigen_scale.or(file.eigen_scale),
        garch,
        box_scheme: cli.box_scheme.or(file.box_scheme).unwrap_or_default(),
        eigen_target: cli.eigen_target.or(file.eigen_target).unwrap_or_default(),
        eigen_weights: cli.eigen_weights.or(file.eigen_weights).unwrap_or_default(),
        connectedness,
    };
    Ok(RunSettings {
        config,
        windows: cli.windows.clone().or_else(|| file.windows.clone()),
        export_edges: cli.export_edges || file.export_edges.unwrap_or(false),
        export_garch: cli.export_garch || file.export_garch.unwrap_or(false),
        export_density: cli.export_density || file.export_density.unwrap_or(false),
    })
}
