//! Report writing: CSV or JSON rows tagged with the config hash and library version.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{Output, OutputFormat};

/// First 16 hex digits of the SHA-256 of the experiment name and resolved config as JSON.
pub fn config_hash<C: Serialize>(experiment: &str, config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(&(experiment, config))?;
    Ok(hex::encode(&Sha256::digest(&bytes)[..8]))
}

/// Stamped onto every row.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_hash: String,
    pub version: &'static str,
}

fn to_records<R: Serialize>(rows: &[R], prov: &Provenance) -> Result<Vec<Map<String, Value>>> {
    rows.iter()
        .map(|r| {
            let Value::Object(mut obj) = serde_json::to_value(r)? else {
                bail!("report rows must serialise to objects");
            };
            obj.insert("config_hash".into(), Value::String(prov.config_hash.clone()));
            obj.insert("version".into(), Value::String(prov.version.into()));
            Ok(obj)
        })
        .collect()
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    }
}

fn write_records(w: impl Write, records: &[Map<String, Value>], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, records)?;
            writeln!(w)?;
        }
        OutputFormat::Csv => {
            let mut out = csv::Writer::from_writer(w);
            if let Some(first) = records.first() {
                out.write_record(first.keys())?;
            }
            for r in records {
                out.write_record(r.values().map(cell))?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// `<dir>/<stem>.summary.<ext>` next to `out`.
pub fn summary_path(out: &Path, format: OutputFormat) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.summary.{}", format.extension()))
}

fn create(path: &Path, overwrite: bool) -> Result<BufWriter<File>> {
    if path.exists() && !overwrite {
        bail!("{} exists; pass --overwrite to replace it", path.display());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes rows to `out` and the summary beside it, or only the summary to stdout
/// when no path is given.
pub fn emit<R: Serialize, S: Serialize>(output: &Output, prov: &Provenance, rows: &[R], summary: &[S]) -> Result<()> {
    let rows = to_records(rows, prov)?;
    let summary = to_records(summary, prov)?;
    match &output.out {
        None => write_records(io::stdout().lock(), &summary, output.format),
        Some(path) => {
            let side = summary_path(path, output.format);
            // Check both before writing either, so a refusal leaves nothing half-written.
            for p in [path, &side] {
                if p.exists() && !output.overwrite {
                    bail!("{} exists; pass --overwrite to replace it", p.display());
                }
            }
            write_records(create(path, output.overwrite)?, &rows, output.format)?;
            write_records(create(&side, output.overwrite)?, &summary, output.format)?;
            eprintln!("wrote {} rows to {} and {}", rows.len(), path.display(), side.display());
            Ok(())
        }
    }
}
