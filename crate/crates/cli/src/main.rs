mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use crate::config::Cli;

/// Invalid flag combinations or missing inputs.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use dccanet::pipeline::PipelineError;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return "usage";
        }
        if cause.is::<dccanet::ingest::IngestError>() {
            return "ingest";
        }
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return match p {
                PipelineError::InvalidConfig(_) => "config",
                _ => "pipeline",
            };
        }
        if cause.is::<dccanet::dcca::DccaError>() {
            return "dcca";
        }
        if cause.is::<dccanet::connectedness::ConnectednessError>() {
            return "connectedness";
        }
        if cause.is::<dccanet::garch::GarchError>() {
            return "garch";
        }
        if cause.is::<dccanet::stats::StatsError>() {
            return "stats";
        }
        if cause.is::<toml::de::Error>() {
            return "config";
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return "io";
        }
    }
    "internal"
}

fn report(kind: &str, message: String, causes: Vec<String>) {
    let body = json!({ "error": { "kind": kind, "message": message, "causes": causes } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report(
                "usage",
                e.render().to_string().trim().to_string(),
                Vec::new(),
            );
            return ExitCode::from(2);
        }
    };
    match commands::dispatch(cli) {
        Ok(outputs) => {
            for path in outputs {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let causes = err.chain().skip(1).map(|c| c.to_string()).collect();
            report(error_kind(&err), format!("{err:#}"), causes);
            ExitCode::from(1)
        }
    }
}
