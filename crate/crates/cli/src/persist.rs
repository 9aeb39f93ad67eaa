//! Payload files, metadata sidecars and replay.
//!
//! A payload file holds only the result table, so reruns of the same
//! configuration produce identical bytes. The timestamp, artifact version and
//! full configuration go into `<payload>.meta.json` next to it.

use std::fs;
use std::path::{Path, PathBuf};

use bcmac_core::prob::LogBase;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, Result};
use crate::run::run;
use crate::table::{Table, SCHEMA_VERSION};

/// Metadata written next to every persisted payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    /// Build version, `v<crate version>[-g<commit>]`.
    pub version: String,
    /// RFC 3339 time the run finished.
    pub timestamp: String,
    pub config: ExperimentConfig,
    /// Payload file name, relative to the sidecar.
    pub payload_file: String,
    pub payload_kind: String,
    pub unit: LogBase,
    pub rows: usize,
}

pub fn artifact_version() -> String {
    let rev = env!("BCMAC_GIT_REV");
    if rev.is_empty() {
        format!("v{}", env!("CARGO_PKG_VERSION"))
    } else {
        format!("v{}-g{rev}", env!("CARGO_PKG_VERSION"))
    }
}

/// Encodes a table in `format`.
pub fn emit(table: &Table, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => table.to_csv()?,
        Format::Json => table.to_json(),
    })
}

/// Decodes a payload written by [`emit`].
pub fn parse_payload(text: &str, format: Format, kind: &str, unit: LogBase) -> Result<Table> {
    Ok(match format {
        Format::Csv => Table::from_csv(text, kind, unit)?,
        Format::Json => Table::from_json(text)?,
    })
}

pub fn sidecar_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the payload and its sidecar.
pub fn persist(cfg: &ExperimentConfig, table: &Table, out: &Path) -> Result<ResultRecord> {
    let body = emit(table, cfg.format)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(out, body).map_err(|e| CliError::io(out, e))?;
    let record = ResultRecord {
        schema_version: SCHEMA_VERSION,
        version: artifact_version(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config: cfg.clone(),
        payload_file: out
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        payload_kind: table.kind.clone(),
        unit: table.unit,
        rows: table.rows.len(),
    };
    let meta = sidecar_path(out);
    let mut text = serde_json::to_string_pretty(&record).expect("record serialises");
    text.push('\n');
    fs::write(&meta, text).map_err(|e| CliError::io(&meta, e))?;
    Ok(record)
}

pub fn load_record(path: &Path) -> Result<ResultRecord> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("not a result record: {e}")))
}

/// Outcome of a replay.
#[derive(Debug, Clone)]
pub struct Replay {
    pub record: ResultRecord,
    pub payload_path: PathBuf,
    pub table: Table,
}

/// Re-runs the configuration in the sidecar at `record_path` and checks the
/// new payload against the recorded one byte for byte. With `out`, the new
/// payload is also persisted there.
pub fn replay(record_path: &Path, out: Option<&Path>) -> Result<Replay> {
    let record = load_record(record_path)?;
    let payload_path = record_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&record.payload_file);
    let recorded = fs::read(&payload_path).map_err(|e| CliError::io(&payload_path, e))?;
    let table = run(&record.config)?;
    let fresh = emit(&table, record.config.format)?;
    if let Some(out) = out {
        persist(&record.config, &table, out)?;
    }
    if fresh.as_bytes() != recorded.as_slice() {
        return Err(CliError::ReplayMismatch { path: payload_path });
    }
    Ok(Replay {
        record,
        payload_path,
        table,
    })
}
