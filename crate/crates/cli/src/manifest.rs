use std::path::PathBuf;

use chrono::{DateTime, SecondsFormat, Utc};
use hypokinetic::Result;
use serde::Serialize;

use crate::commands::Run;

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a serde_json::Value,
    outputs: &'a [PathBuf],
    exit_code: i32,
    started: String,
    finished: String,
}

/// `manifest.json` in the output directory. Timestamps live only here.
pub fn write(run: &Run, started: DateTime<Utc>) -> Result<()> {
    let m = Manifest {
        command: run.command,
        version: env!("CARGO_PKG_VERSION"),
        config: &run.config,
        outputs: &run.outputs,
        exit_code: run.exit_code,
        started: started.to_rfc3339_opts(SecondsFormat::Millis, true),
        finished: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
    };
    let text = serde_json::to_string_pretty(&m)?;
    std::fs::write(run.out_dir.join("manifest.json"), text + "\n")?;
    Ok(())
}
