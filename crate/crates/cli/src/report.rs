//! Report emission. `serde_json::Value` keeps object keys sorted and prints
//! floats in shortest round-trip form, so equal runs give equal bytes.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::commands::Outcome;

fn write(out: Option<&Path>, command: &str, report: &Value, csv: &[(String, String)]) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{command}.json"));
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        for (name, body) in csv {
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

pub fn emit(out: Option<&Path>, command: &str, config: &Value, outcome: &Outcome) -> Result<()> {
    let report = json!({
        "command": command,
        "config": config,
        "passed": outcome.passed,
        "result": outcome.result,
    });
    write(out, command, &report, &outcome.csv)
}

/// Partial report for a run that stopped on a numerical failure.
pub fn emit_failure(out: Option<&Path>, command: &str, config: &Value, error: &str) -> Result<()> {
    let report = json!({
        "command": command,
        "config": config,
        "passed": false,
        "error": error,
    });
    write(out, command, &report, &[])
}
