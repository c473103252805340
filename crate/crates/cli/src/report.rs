use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub n: usize,
    /// `K` for single-user scenarios, the trace of `F` for two-user ones.
    pub k_or_alpha: f64,
    pub method: String,
    pub seed: u64,
    pub restarts: usize,
    /// Expected bits per requested item (per request pair for two users).
    pub expected_bits: f64,
    /// Design objective: divergence part of the cost in bits per symbol;
    /// empty for baselines.
    pub objective_bits_per_symbol: Option<f64>,
    pub runtime_ms: Option<u64>,
}

/// A file emitted next to the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Ties a CSV row to the files it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub row: usize,
    /// `single`, `twouser` or `self_decodable`/`self_decodable_int`.
    pub kind: String,
    /// Preference file (for `twouser`, only its SPVs are used).
    pub preference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    /// Joint preference generator parameter (two-user rows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub len: usize,
}

pub fn csv_string(rows: &[CsvRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Directory holding the artifacts of the CSV at `out`.
pub fn artifact_dir(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}_files"))
}

pub fn write_outputs(out: &Path, rows: &[CsvRow], artifacts: &[Artifact]) -> Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, csv_string(rows)?).with_context(|| format!("writing {}", out.display()))?;
    if !artifacts.is_empty() {
        let dir = artifact_dir(out);
        fs::create_dir_all(&dir)?;
        for a in artifacts {
            let mut f = fs::File::create(dir.join(&a.name))
                .with_context(|| format!("writing {}", a.name))?;
            f.write_all(a.contents.as_bytes())?;
        }
    }
    Ok(())
}

pub(crate) fn json_artifact<T: Serialize>(name: String, value: &T) -> Result<Artifact> {
    let mut contents = serde_json::to_string_pretty(value)?;
    contents.push('\n');
    Ok(Artifact { name, contents })
}
