use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde_json::json;

use crate::commands::Outcome;
use crate::config::RunConfig;

/// Writes `bytes` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_outputs(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    outcome: &Outcome,
    elapsed: f64,
    threads: Option<usize>,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if !outcome.rows.is_empty() {
        let mut csv = Vec::new();
        bbgky_core::solver::write_rows(&mut csv, &outcome.rows)?;
        write_atomic(&dir.join("results.csv"), &csv)?;
    }
    let manifest = json!({
        "command": command,
        "config": cfg.echo()?,
        "versions": {
            "bbgky-cli": env!("CARGO_PKG_VERSION"),
            "bbgky-core": bbgky_core::VERSION,
        },
        "threads": threads,
        "timings": { "total_seconds": elapsed },
        "warnings": outcome.warnings,
        "passed": outcome.passed,
        "rows": outcome.rows.len(),
        "report": outcome.report,
    });
    write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(())
}
