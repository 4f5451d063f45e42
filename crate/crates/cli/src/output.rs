use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

/// Version, configuration hash and seed attached to every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Provenance {
    /// Hashes the effective configuration and every input file's bytes.
    pub fn new<C: Serialize>(config: &C, inputs: &[&[u8]], seed: Option<u64>) -> Self {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(config).expect("configuration serializes"));
        for bytes in inputs {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        let digest = h.finalize();
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self { tool: "lpa".into(), version: env!("CARGO_PKG_VERSION").into(), config_sha256, seed }
    }

    pub fn csv_header(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        format!(
            "# {} {}\n# config_sha256 {}\n# seed {}\n",
            self.tool, self.version, self.config_sha256, seed
        )
    }
}

/// Serializes `value` as pretty JSON with a top-level `provenance` field.
pub fn json_with_provenance<T: Serialize>(value: &T, prov: &Provenance) -> CliResult<String> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("provenance".into(), serde_json::to_value(prov)?);
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// CSV text with the provenance header; `rows` are already formatted fields.
pub fn csv_text(prov: &Provenance, header: &[String], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| crate::error::CliError::Config(e.to_string()))?)
        .expect("csv output is UTF-8");
    Ok(prov.csv_header() + &body)
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
